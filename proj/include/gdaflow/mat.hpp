#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdaflow {

/// Dense row-major matrix of doubles. Vectors are n x 1 or 1 x n.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), a(std::move(data)) {
    if (a.size() != static_cast<size_t>(r) * c)
      throw std::invalid_argument("Mat: data size " + std::to_string(a.size()) +
                                  " does not match " + std::to_string(r) + "x" + std::to_string(c));
  }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat column(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Mat(n, 1, std::move(v));
  }

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row_ptr(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

  size_t size() const { return a.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

inline void require_shape(const Mat& m, int r, int c, const char* what) {
  if (m.rows != r || m.cols != c)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(r) + "x" +
                                std::to_string(c) + ", got " + m.shape_str());
}

}  // namespace gdaflow
