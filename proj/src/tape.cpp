#include "gdaflow/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdaflow::ad {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation: " + name);
}

double act_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Activation::Relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

double act_deriv_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

double act_deriv2_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Softplus: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::Relu: return 0.0;
  }
  return 0.0;
}

VarId Tape::push(Mat value, bool needs_grad, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Mat{}, needs_grad, std::move(back)});
  return static_cast<VarId>(nodes_.size() - 1);
}

Mat& Tape::grad_buf(VarId id) {
  Node& n = nodes_[id];
  if (n.grad.rows == 0) n.grad = Mat::zeros(n.value.rows, n.value.cols);
  return n.grad;
}

VarId Tape::input(Mat value) { return push(std::move(value), true, nullptr); }
VarId Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

double Tape::scalar(VarId id) const {
  const Mat& v = nodes_[id].value;
  if (v.rows != 1 || v.cols != 1)
    throw std::invalid_argument("scalar(): node is " + v.shape_str());
  return v.a[0];
}

const Mat& Tape::grad(VarId id) const {
  if (!ran_backward_) throw std::logic_error("grad(): backward() has not run");
  const Node& n = nodes_[id];
  if (n.grad.rows == 0)
    throw std::logic_error("grad(): node has no gradient (constant or unreached)");
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  ran_backward_ = false;
}

void Tape::backward(VarId loss) {
  const Mat& lv = nodes_[loss].value;
  if (lv.rows != 1 || lv.cols != 1)
    throw std::invalid_argument("backward(): loss must be scalar, got " + lv.shape_str());
  grad_buf(loss).a[0] = 1.0;
  for (VarId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.rows == 0 || !n.back) continue;
    n.back(*this);
  }
  ran_backward_ = true;
}

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

VarId Tape::lincomb(const std::vector<std::pair<double, VarId>>& terms) {
  if (terms.empty()) throw std::invalid_argument("lincomb: no terms");
  const Mat& first = nodes_[terms[0].second].value;
  Mat out = Mat::zeros(first.rows, first.cols);
  bool any_grad = false;
  for (const auto& [c, tid] : terms) {
    const Mat& v = nodes_[tid].value;
    if (!v.same_shape(first))
      throw std::invalid_argument("lincomb: shape mismatch " + v.shape_str() + " vs " +
                                  first.shape_str());
    for (size_t k = 0; k < out.size(); ++k) out.a[k] += c * v.a[k];
    any_grad = any_grad || needs(tid);
  }
  VarId id = push(std::move(out), any_grad, nullptr);
  if (any_grad) {
    nodes_[id].back = [id, terms](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      for (const auto& [c, tid] : terms) {
        if (!t.needs(tid)) continue;
        Mat& g = t.grad_buf(tid);
        for (size_t k = 0; k < go.size(); ++k) g.a[k] += c * go.a[k];
      }
    };
  }
  return id;
}

VarId Tape::add_scalar_broadcast(VarId x, VarId scalar) {
  const Mat& xv = nodes_[x].value;
  const Mat& sv = nodes_[scalar].value;
  if (sv.rows != 1 || sv.cols != 1)
    throw std::invalid_argument("add_scalar_broadcast: scalar is " + sv.shape_str());
  Mat out = xv;
  for (double& v : out.a) v += sv.a[0];
  const bool g = needs(x) || needs(scalar);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, scalar](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      if (t.needs(x)) {
        Mat& gx = t.grad_buf(x);
        for (size_t k = 0; k < go.size(); ++k) gx.a[k] += go.a[k];
      }
      if (t.needs(scalar)) {
        double s = 0.0;
        for (double v : go.a) s += v;
        t.grad_buf(scalar).a[0] += s;
      }
    };
  }
  return id;
}

VarId Tape::square(VarId x) {
  const Mat& xv = nodes_[x].value;
  Mat out = xv;
  for (double& v : out.a) v *= v;
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      Mat& gx = t.grad_buf(x);
      for (size_t k = 0; k < go.size(); ++k) gx.a[k] += 2.0 * xv2.a[k] * go.a[k];
    };
  }
  return id;
}

VarId Tape::mul_const(VarId x, const Mat& mask) {
  const Mat& xv = nodes_[x].value;
  if (!xv.same_shape(mask))
    throw std::invalid_argument("mul_const: shape mismatch " + xv.shape_str() + " vs " +
                                mask.shape_str());
  Mat out = xv;
  for (size_t k = 0; k < out.size(); ++k) out.a[k] *= mask.a[k];
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    Mat m = mask;
    nodes_[id].back = [id, x, m](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gx = t.grad_buf(x);
      for (size_t k = 0; k < go.size(); ++k) gx.a[k] += m.a[k] * go.a[k];
    };
  }
  return id;
}

VarId Tape::affine(VarId x, VarId w, VarId b) {
  const Mat& xv = nodes_[x].value;
  const Mat& wv = nodes_[w].value;
  const Mat& bv = nodes_[b].value;
  if (wv.cols != xv.cols)
    throw std::invalid_argument("affine: X is " + xv.shape_str() + " but W is " + wv.shape_str());
  if (bv.rows != wv.rows || bv.cols != 1)
    throw std::invalid_argument("affine: b is " + bv.shape_str() + " but W has " +
                                std::to_string(wv.rows) + " rows");
  const int n = xv.rows, in = xv.cols, out_dim = wv.rows;
  Mat out(n, out_dim);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (int o = 0; o < out_dim; ++o) {
      const double* wo = wv.row_ptr(o);
      double s = bv.a[o];
      for (int k = 0; k < in; ++k) s += xi[k] * wo[k];
      oi[o] = s;
    }
  }
  const bool g = needs(x) || needs(w) || needs(b);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, w, b, n, in, out_dim](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      const Mat& wv2 = t.nodes_[w].value;
      if (t.needs(w)) {
        Mat& gw = t.grad_buf(w);
        for (int o = 0; o < out_dim; ++o) {
          double* gwo = gw.row_ptr(o);
          for (int i = 0; i < n; ++i) {
            const double gio = go.at(i, o);
            const double* xi = xv2.row_ptr(i);
            for (int k = 0; k < in; ++k) gwo[k] += gio * xi[k];
          }
        }
      }
      if (t.needs(b)) {
        Mat& gb = t.grad_buf(b);
        for (int i = 0; i < n; ++i)
          for (int o = 0; o < out_dim; ++o) gb.a[o] += go.at(i, o);
      }
      if (t.needs(x)) {
        Mat& gx = t.grad_buf(x);
        for (int i = 0; i < n; ++i) {
          double* gxi = gx.row_ptr(i);
          const double* goi = go.row_ptr(i);
          for (int o = 0; o < out_dim; ++o) {
            const double gio = goi[o];
            const double* wo = wv2.row_ptr(o);
            for (int k = 0; k < in; ++k) gxi[k] += gio * wo[k];
          }
        }
      }
    };
  }
  return id;
}

VarId Tape::act(VarId x, Activation a) {
  const Mat& xv = nodes_[x].value;
  Mat out = xv;
  for (double& v : out.a) v = act_value(a, v);
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, a](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      Mat& gx = t.grad_buf(x);
      for (size_t k = 0; k < go.size(); ++k)
        gx.a[k] += act_deriv_value(a, xv2.a[k]) * go.a[k];
    };
  }
  return id;
}

VarId Tape::act_deriv(VarId x, Activation a) {
  const Mat& xv = nodes_[x].value;
  Mat out = xv;
  for (double& v : out.a) v = act_deriv_value(a, v);
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, a](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      Mat& gx = t.grad_buf(x);
      for (size_t k = 0; k < go.size(); ++k)
        gx.a[k] += act_deriv2_value(a, xv2.a[k]) * go.a[k];
    };
  }
  return id;
}

VarId Tape::append_const_col(VarId x, double value) {
  const Mat& xv = nodes_[x].value;
  const int n = xv.rows, c = xv.cols;
  Mat out(n, c + 1);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.row_ptr(i);
    double* oi = out.row_ptr(i);
    std::copy(xi, xi + c, oi);
    oi[c] = value;
  }
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, n, c](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gx = t.grad_buf(x);
      for (int i = 0; i < n; ++i) {
        const double* goi = go.row_ptr(i);
        double* gxi = gx.row_ptr(i);
        for (int k = 0; k < c; ++k) gxi[k] += goi[k];
      }
    };
  }
  return id;
}

VarId Tape::col_mean(VarId x) {
  const Mat& xv = nodes_[x].value;
  const int n = xv.rows, c = xv.cols;
  Mat out(1, c);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) out.a[k] += xv.at(i, k);
  for (int k = 0; k < c; ++k) out.a[k] /= n;
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, n, c](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gx = t.grad_buf(x);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) gx.at(i, k) += go.a[k] / n;
    };
  }
  return id;
}

VarId Tape::add_row_broadcast(VarId x, VarId row) {
  const Mat& xv = nodes_[x].value;
  const Mat& rv = nodes_[row].value;
  if (rv.rows != 1 || rv.cols != xv.cols)
    throw std::invalid_argument("add_row_broadcast: row is " + rv.shape_str());
  Mat out = xv;
  for (int i = 0; i < xv.rows; ++i)
    for (int k = 0; k < xv.cols; ++k) out.at(i, k) += rv.a[k];
  const bool g = needs(x) || needs(row);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, row](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      if (t.needs(x)) {
        Mat& gx = t.grad_buf(x);
        for (size_t k = 0; k < go.size(); ++k) gx.a[k] += go.a[k];
      }
      if (t.needs(row)) {
        Mat& gr = t.grad_buf(row);
        for (int i = 0; i < go.rows; ++i)
          for (int k = 0; k < go.cols; ++k) gr.a[k] += go.at(i, k);
      }
    };
  }
  return id;
}

VarId Tape::mul_row_broadcast(VarId x, VarId row) {
  const Mat& xv = nodes_[x].value;
  const Mat& rv = nodes_[row].value;
  if (rv.rows != 1 || rv.cols != xv.cols)
    throw std::invalid_argument("mul_row_broadcast: row is " + rv.shape_str());
  Mat out = xv;
  for (int i = 0; i < xv.rows; ++i)
    for (int k = 0; k < xv.cols; ++k) out.at(i, k) *= rv.a[k];
  const bool g = needs(x) || needs(row);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, row](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      const Mat& rv2 = t.nodes_[row].value;
      if (t.needs(x)) {
        Mat& gx = t.grad_buf(x);
        for (int i = 0; i < go.rows; ++i)
          for (int k = 0; k < go.cols; ++k) gx.at(i, k) += rv2.a[k] * go.at(i, k);
      }
      if (t.needs(row)) {
        Mat& gr = t.grad_buf(row);
        for (int i = 0; i < go.rows; ++i)
          for (int k = 0; k < go.cols; ++k) gr.a[k] += xv2.at(i, k) * go.at(i, k);
      }
    };
  }
  return id;
}

VarId Tape::rsqrt_shift(VarId x, double eps) {
  const Mat& xv = nodes_[x].value;
  Mat out = xv;
  for (double& v : out.a) v = 1.0 / std::sqrt(v + eps);
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& ov = t.nodes_[id].value;
      Mat& gx = t.grad_buf(x);
      for (size_t k = 0; k < go.size(); ++k)
        gx.a[k] += -0.5 * ov.a[k] * ov.a[k] * ov.a[k] * go.a[k];
    };
  }
  return id;
}

VarId Tape::block_affine(VarId x, VarId log_scale, VarId shift, const std::vector<double>& mu,
                         const std::vector<double>& var, double eps, bool inverse) {
  const Mat& xv = nodes_[x].value;
  const Mat& sv = nodes_[log_scale].value;
  const Mat& mv = nodes_[shift].value;
  const int n = xv.rows, d = xv.cols;
  if (sv.rows != d || sv.cols != 1 || mv.rows != d || mv.cols != 1 ||
      static_cast<int>(mu.size()) != d || static_cast<int>(var.size()) != d)
    throw std::invalid_argument("block_affine: parameter shape mismatch for D=" +
                                std::to_string(d));
  std::vector<double> inv_sd(d), scale(d);
  for (int k = 0; k < d; ++k) {
    inv_sd[k] = 1.0 / std::sqrt(var[k] + eps);
    scale[k] = std::exp(sv.a[k]);
  }
  Mat out(n, d);
  if (!inverse) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k)
        out.at(i, k) = scale[k] * (xv.at(i, k) - mu[k]) * inv_sd[k] + mv.a[k];
  } else {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k)
        out.at(i, k) = (xv.at(i, k) - mv.a[k]) / (scale[k] * inv_sd[k]) + mu[k];
  }
  const bool g = needs(x) || needs(log_scale) || needs(shift);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    std::vector<double> mu_c = mu;
    nodes_[id].back = [id, x, log_scale, shift, inv_sd, mu_c, inverse, n, d](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      const Mat& sv2 = t.nodes_[log_scale].value;
      const Mat& mv2 = t.nodes_[shift].value;
      const bool nx = t.needs(x), ns = t.needs(log_scale), nm = t.needs(shift);
      for (int k = 0; k < d; ++k) {
        const double sc = std::exp(sv2.a[k]);
        const double a = inverse ? 1.0 / (sc * inv_sd[k]) : sc * inv_sd[k];
        double gs = 0.0, gm = 0.0;
        for (int i = 0; i < n; ++i) {
          const double gik = go.at(i, k);
          if (nx) t.grad_buf(x).at(i, k) += a * gik;
          if (!inverse) {
            gs += gik * sc * (xv2.at(i, k) - mu_c[k]) * inv_sd[k];
            gm += gik;
          } else {
            gs += -gik * (xv2.at(i, k) - mv2.a[k]) * a;
            gm += -gik * a;
          }
        }
        if (ns) t.grad_buf(log_scale).a[k] += gs;
        if (nm) t.grad_buf(shift).a[k] += gm;
      }
    };
  }
  return id;
}

VarId Tape::jac_from_weight(VarId w, int d, int n) {
  const Mat& wv = nodes_[w].value;
  const int h = wv.rows;
  if (wv.cols < d) throw std::invalid_argument("jac_from_weight: W has fewer than D columns");
  Mat out(n, h * d);
  for (int i = 0; i < n; ++i) {
    double* oi = out.row_ptr(i);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < d; ++c) oi[r * d + c] = wv.at(r, c);
  }
  const bool g = needs(w);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, w, d, n, h](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gw = t.grad_buf(w);
      for (int i = 0; i < n; ++i) {
        const double* goi = go.row_ptr(i);
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < d; ++c) gw.at(r, c) += goi[r * d + c];
      }
    };
  }
  return id;
}

VarId Tape::jac_rowscale(VarId m, VarId s, int d) {
  const Mat& mv = nodes_[m].value;
  const Mat& sv = nodes_[s].value;
  const int n = mv.rows;
  const int h = sv.cols;
  if (sv.rows != n || h * d != mv.cols)
    throw std::invalid_argument("jac_rowscale: M is " + mv.shape_str() + ", S is " +
                                sv.shape_str() + ", D=" + std::to_string(d));
  Mat out(n, mv.cols);
  for (int i = 0; i < n; ++i) {
    const double* mi = mv.row_ptr(i);
    const double* si = sv.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (int r = 0; r < h; ++r) {
      const double sc = si[r];
      for (int c = 0; c < d; ++c) oi[r * d + c] = sc * mi[r * d + c];
    }
  }
  const bool g = needs(m) || needs(s);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, m, s, d, n, h](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& mv2 = t.nodes_[m].value;
      const Mat& sv2 = t.nodes_[s].value;
      for (int i = 0; i < n; ++i) {
        const double* goi = go.row_ptr(i);
        const double* mi = mv2.row_ptr(i);
        const double* si = sv2.row_ptr(i);
        if (t.needs(m)) {
          double* gm = t.grad_buf(m).row_ptr(i);
          for (int r = 0; r < h; ++r)
            for (int c = 0; c < d; ++c) gm[r * d + c] += si[r] * goi[r * d + c];
        }
        if (t.needs(s)) {
          double* gs = t.grad_buf(s).row_ptr(i);
          for (int r = 0; r < h; ++r) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += goi[r * d + c] * mi[r * d + c];
            gs[r] += acc;
          }
        }
      }
    };
  }
  return id;
}

VarId Tape::jac_matmul(VarId w, VarId m, int d) {
  const Mat& wv = nodes_[w].value;
  const Mat& mv = nodes_[m].value;
  const int n = mv.rows;
  const int h_in = wv.cols;
  const int h_out = wv.rows;
  if (h_in * d != mv.cols)
    throw std::invalid_argument("jac_matmul: W is " + wv.shape_str() + ", M is " +
                                mv.shape_str() + ", D=" + std::to_string(d));
  Mat out(n, h_out * d);
  for (int i = 0; i < n; ++i) {
    const double* mi = mv.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (int r = 0; r < h_out; ++r) {
      const double* wr = wv.row_ptr(r);
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int k = 0; k < h_in; ++k) acc += wr[k] * mi[k * d + c];
        oi[r * d + c] = acc;
      }
    }
  }
  const bool g = needs(w) || needs(m);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, w, m, d, n, h_in, h_out](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& wv2 = t.nodes_[w].value;
      const Mat& mv2 = t.nodes_[m].value;
      for (int i = 0; i < n; ++i) {
        const double* goi = go.row_ptr(i);
        const double* mi = mv2.row_ptr(i);
        if (t.needs(w)) {
          Mat& gw = t.grad_buf(w);
          for (int r = 0; r < h_out; ++r) {
            double* gwr = gw.row_ptr(r);
            for (int k = 0; k < h_in; ++k) {
              double acc = 0.0;
              for (int c = 0; c < d; ++c) acc += goi[r * d + c] * mi[k * d + c];
              gwr[k] += acc;
            }
          }
        }
        if (t.needs(m)) {
          double* gm = t.grad_buf(m).row_ptr(i);
          for (int k = 0; k < h_in; ++k)
            for (int c = 0; c < d; ++c) {
              double acc = 0.0;
              for (int r = 0; r < h_out; ++r) acc += wv2.at(r, k) * goi[r * d + c];
              gm[k * d + c] += acc;
            }
        }
      }
    };
  }
  return id;
}

VarId Tape::jac_trace(VarId m, int d) {
  const Mat& mv = nodes_[m].value;
  const int n = mv.rows;
  if (mv.cols != d * d)
    throw std::invalid_argument("jac_trace: M is " + mv.shape_str() + " but D*D=" +
                                std::to_string(d * d));
  Mat out(n, 1);
  for (int i = 0; i < n; ++i) {
    const double* mi = mv.row_ptr(i);
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += mi[k * d + k];
    out.a[i] = acc;
  }
  const bool g = needs(m);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, m, d, n](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gm = t.grad_buf(m);
      for (int i = 0; i < n; ++i) {
        double* gmi = gm.row_ptr(i);
        for (int k = 0; k < d; ++k) gmi[k * d + k] += go.a[i];
      }
    };
  }
  return id;
}

VarId Tape::sum_all(VarId x) {
  const Mat& xv = nodes_[x].value;
  double s = 0.0;
  for (double v : xv.a) s += v;
  Mat out(1, 1);
  out.a[0] = s;
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x](Tape& t) {
      const double go = t.nodes_[id].grad.a[0];
      Mat& gx = t.grad_buf(x);
      for (double& v : gx.a) v += go;
    };
  }
  return id;
}

VarId Tape::mean_all(VarId x) {
  const Mat& xv = nodes_[x].value;
  const double inv = 1.0 / static_cast<double>(xv.size());
  double s = 0.0;
  for (double v : xv.a) s += v;
  Mat out(1, 1);
  out.a[0] = s * inv;
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, inv](Tape& t) {
      const double go = t.nodes_[id].grad.a[0] * inv;
      Mat& gx = t.grad_buf(x);
      for (double& v : gx.a) v += go;
    };
  }
  return id;
}

VarId Tape::row_sumsq(VarId x) {
  const Mat& xv = nodes_[x].value;
  const int n = xv.rows, c = xv.cols;
  Mat out(n, 1);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.row_ptr(i);
    double acc = 0.0;
    for (int k = 0; k < c; ++k) acc += xi[k] * xi[k];
    out.a[i] = acc;
  }
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, n, c](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      Mat& gx = t.grad_buf(x);
      for (int i = 0; i < n; ++i) {
        const double gi = go.a[i];
        const double* xi = xv2.row_ptr(i);
        double* gxi = gx.row_ptr(i);
        for (int k = 0; k < c; ++k) gxi[k] += 2.0 * xi[k] * gi;
      }
    };
  }
  return id;
}

VarId Tape::row_norm(VarId x, double guard) {
  const Mat& xv = nodes_[x].value;
  const int n = xv.rows, c = xv.cols;
  Mat out(n, 1);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.row_ptr(i);
    double acc = 0.0;
    for (int k = 0; k < c; ++k) acc += xi[k] * xi[k];
    out.a[i] = std::sqrt(acc);
  }
  const bool g = needs(x);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, x, n, c, guard](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      const Mat& xv2 = t.nodes_[x].value;
      const Mat& ov = t.nodes_[id].value;
      Mat& gx = t.grad_buf(x);
      for (int i = 0; i < n; ++i) {
        const double nrm = ov.a[i];
        if (nrm * nrm <= guard) continue;  // kink: subgradient 0
        const double gi = go.a[i] / nrm;
        const double* xi = xv2.row_ptr(i);
        double* gxi = gx.row_ptr(i);
        for (int k = 0; k < c; ++k) gxi[k] += xi[k] * gi;
      }
    };
  }
  return id;
}

VarId Tape::softmax_xent(VarId logits, std::vector<int> labels0) {
  const Mat& lv = nodes_[logits].value;
  const int n = lv.rows, cdim = lv.cols;
  if (static_cast<int>(labels0.size()) != n)
    throw std::invalid_argument("softmax_xent: " + std::to_string(labels0.size()) +
                                " labels for " + std::to_string(n) + " rows");
  for (int y : labels0)
    if (y < 0 || y >= cdim)
      throw std::invalid_argument("softmax_xent: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(cdim) + ")");
  Mat out(n, 1);
  Mat probs(n, cdim);
  for (int i = 0; i < n; ++i) {
    const double* li = lv.row_ptr(i);
    double mx = li[0];
    for (int k = 1; k < cdim; ++k) mx = std::max(mx, li[k]);
    double z = 0.0;
    for (int k = 0; k < cdim; ++k) z += std::exp(li[k] - mx);
    const double logz = std::log(z) + mx;
    out.a[i] = logz - li[labels0[i]];
    double* pi = probs.row_ptr(i);
    for (int k = 0; k < cdim; ++k) pi[k] = std::exp(li[k] - logz);
  }
  const bool g = needs(logits);
  VarId id = push(std::move(out), g, nullptr);
  if (g) {
    nodes_[id].back = [id, logits, labels = std::move(labels0), probs = std::move(probs), n,
                       cdim](Tape& t) {
      const Mat& go = t.nodes_[id].grad;
      Mat& gl = t.grad_buf(logits);
      for (int i = 0; i < n; ++i) {
        const double gi = go.a[i];
        const double* pi = probs.row_ptr(i);
        double* gli = gl.row_ptr(i);
        for (int k = 0; k < cdim; ++k) gli[k] += gi * (pi[k] - (k == labels[i] ? 1.0 : 0.0));
      }
    };
  }
  return id;
}

}  // namespace gdaflow::ad
