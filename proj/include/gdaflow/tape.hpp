#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gdaflow/mat.hpp"

namespace gdaflow::ad {

enum class Activation { Identity, Tanh, Softplus, Relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

double act_value(Activation a, double x);
double act_deriv_value(Activation a, double x);
double act_deriv2_value(Activation a, double x);

using VarId = int32_t;

/// Reverse-mode tape over dense matrix operations. The computation graph is
/// recorded op by op (including unrolled ODE steps); backward() then walks
/// the tape in reverse and accumulates exact derivatives of the recorded
/// discretized objective.
///
/// All values are double precision. Node values stay alive until clear(), so
/// a tape is meant to live for one loss evaluation (one minibatch).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that participates in backward(); grad(id) is defined after backward.
  VarId input(Mat value);
  /// Leaf treated as a constant; no gradient is accumulated.
  VarId constant(Mat value);

  // ---- elementwise / linear ----
  /// sum_k coeff_k * X_k, all same shape.
  VarId lincomb(const std::vector<std::pair<double, VarId>>& terms);
  VarId add(VarId x, VarId y) { return lincomb({{1.0, x}, {1.0, y}}); }
  VarId sub(VarId x, VarId y) { return lincomb({{1.0, x}, {-1.0, y}}); }
  VarId scale(VarId x, double c) { return lincomb({{c, x}}); }
  VarId add_scalar_broadcast(VarId x, VarId scalar);  // scalar is 1x1
  VarId square(VarId x);
  VarId mul_const(VarId x, const Mat& mask);  // elementwise, mask fixed (dropout)

  // ---- neural net ----
  /// Y = X * W^T + b ; X is [n,in], W is [out,in], b is [out,1].
  VarId affine(VarId x, VarId w, VarId b);
  VarId act(VarId x, Activation a);
  /// sigma'(x) as a value on the tape (its backward uses sigma'').
  VarId act_deriv(VarId x, Activation a);
  /// Append one constant column (the time input of the velocity field).
  VarId append_const_col(VarId x, double value);

  // ---- batch normalization helpers ----
  VarId col_mean(VarId x);                      // [n,c] -> [1,c]
  VarId add_row_broadcast(VarId x, VarId row);  // [n,c] + [1,c]
  VarId mul_row_broadcast(VarId x, VarId row);  // [n,c] * [1,c]
  VarId rsqrt_shift(VarId x, double eps);       // 1/sqrt(x + eps)

  /// Invertible per-dimension affine used between flow blocks:
  /// forward:  y = exp(s) * (x - mu)/sqrt(var+eps) + m
  /// inverse:  y = (x - m) * exp(-s) * sqrt(var+eps) + mu
  /// s and m are [D,1] parameters; mu/var are stored statistics.
  VarId block_affine(VarId x, VarId log_scale, VarId shift, const std::vector<double>& mu,
                     const std::vector<double>& var, double eps, bool inverse);

  // ---- per-sample Jacobian propagation (exact trace, O(D^2)) ----
  // A Jacobian block per sample is an H x D matrix, flattened row-major into
  // one row of an [n, H*D] tape value.
  VarId jac_from_weight(VarId w, int d, int n);        // tile W[:, 0:d] per sample
  VarId jac_rowscale(VarId m, VarId s, int d);         // diag(S_i) * M_i
  VarId jac_matmul(VarId w, VarId m, int d);           // W * M_i
  VarId jac_trace(VarId m, int d);                     // [n,1], M_i is d x d

  // ---- reductions & losses ----
  VarId sum_all(VarId x);    // [1,1]
  VarId mean_all(VarId x);   // [1,1]
  VarId row_sumsq(VarId x);  // [n,1]
  /// Per-row Euclidean norm. At the norm's kink (sum of squares below the
  /// guard) the backward pass uses subgradient 0 instead of dividing by ~0.
  VarId row_norm(VarId x, double guard = 1e-24);
  /// Softmax cross-entropy per row against 0-based labels; returns [n,1].
  VarId softmax_xent(VarId logits, std::vector<int> labels0);

  // ---- access ----
  const Mat& value(VarId id) const { return nodes_[id].value; }
  double scalar(VarId id) const;
  /// Reverse pass from a scalar loss node. Rejects non-scalar nodes.
  void backward(VarId loss);
  const Mat& grad(VarId id) const;
  bool has_grad(VarId id) const { return nodes_[id].grad.rows != 0; }

  size_t node_count() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Mat value;
    Mat grad;  // allocated lazily in backward
    bool needs_grad = false;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  VarId push(Mat value, bool needs_grad, std::function<void(Tape&)> back);
  Mat& grad_buf(VarId id);
  bool needs(VarId id) const { return nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace gdaflow::ad
