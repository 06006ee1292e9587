#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gdaflow {

/// Seeded random stream with hierarchical forking. All randomness in the
/// toolkit flows through one master seed split per component, so any run
/// (including pseudo-domain regeneration in the cycle pass) replays exactly.
///
/// Distributions are implemented here rather than with std::*_distribution,
/// whose algorithms are implementation-defined.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : base_(mix(seed ^ 0x9e3779b97f4a7c15ull)), engine_(base_) {}

  /// Child stream identified by a label; independent of draw order on the parent.
  RngStream fork(std::string_view label) const {
    uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return from_mixed(mix(base_ ^ h));
  }
  RngStream fork(uint64_t index) const { return from_mixed(mix(base_ ^ mix(index + 0x51ed2701))); }
  RngStream fork(std::string_view label, uint64_t index) const { return fork(label).fork(index); }

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double u01() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // rejection sampling to avoid modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller (deterministic across platforms).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = u01();
    } while (u1 <= 0.0);
    const double u2 = u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  struct MixedTag {};
  RngStream(uint64_t mixed, MixedTag) : base_(mixed), engine_(mixed) {}
  static RngStream from_mixed(uint64_t mixed) { return RngStream(mixed, MixedTag{}); }

  static uint64_t mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t base_ = 0;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gdaflow
