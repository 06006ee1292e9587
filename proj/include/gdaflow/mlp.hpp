#pragma once

#include <string>
#include <vector>

#include "gdaflow/mat.hpp"
#include "gdaflow/rng.hpp"
#include "gdaflow/tape.hpp"

namespace gdaflow {

using ad::Activation;

/// Architecture of a fully connected network. The output layer is always
/// linear; hidden layers carry their own activation.
struct MlpSpec {
  int input_dim = 0;
  std::vector<std::pair<int, Activation>> hidden;  // (width, activation)
  int output_dim = 0;
  double weight_decay = 0.0;

  static MlpSpec make(int input_dim, const std::vector<int>& widths, Activation act,
                      int output_dim, double weight_decay = 0.0);
  void validate() const;
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
};

/// Flat parameter storage plus the slice layout that maps (layer, weight|bias)
/// to a contiguous range. Gradients use the identical layout.
struct ParamVector {
  struct Slice {
    std::string name;  // e.g. "layer0.W"
    size_t offset = 0;
    int rows = 0;
    int cols = 0;
    size_t len() const { return static_cast<size_t>(rows) * cols; }
  };

  std::vector<double> values;
  std::vector<Slice> layout;

  size_t size() const { return values.size(); }
  bool all_finite() const;
  void validate() const;

  const Slice& slice(const std::string& name) const;
  Mat extract(const Slice& s) const;
  Mat extract(const std::string& name) const { return extract(slice(name)); }
  void insert(const Slice& s, const Mat& m);

  /// Same layout, zero values (for gradient assembly).
  ParamVector zeros_like() const;
};

/// Glorot-uniform initialization; when `zero_last_layer` is set the output
/// layer starts at zero (used by the flow so training starts from the
/// identity transport).
ParamVector init_mlp_params(const MlpSpec& spec, RngStream& rng, bool zero_last_layer = false);

/// Appends this MLP's slices to an existing ParamVector under a name prefix.
void append_mlp_params(const MlpSpec& spec, const std::string& prefix, RngStream& rng,
                       bool zero_last_layer, ParamVector& out);

/// Plain forward pass for a single input vector. Rejects shape mismatches
/// with an explicit report.
std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                const std::vector<double>& input,
                                const std::string& prefix = "");

/// Batched plain forward: X is [n, input_dim], result [n, output_dim].
Mat mlp_forward_batch(const MlpSpec& spec, const ParamVector& params, const Mat& x,
                      const std::string& prefix = "");

/// Parameter leaves of one MLP registered on a tape (layout order).
struct MlpVars {
  std::vector<ad::VarId> weights;  // per layer
  std::vector<ad::VarId> biases;
};

MlpVars register_mlp_params(ad::Tape& tape, const MlpSpec& spec, const ParamVector& params,
                            const std::string& prefix = "");

/// Forward pass recorded on the tape; x is [n, input_dim].
ad::VarId mlp_forward_tape(ad::Tape& tape, const MlpSpec& spec, const MlpVars& vars, ad::VarId x);

/// Collect leaf gradients back into a flat vector with the ParamVector layout.
/// Call after tape.backward(). Slices not touched by the graph stay zero.
ParamVector collect_mlp_grads(const ad::Tape& tape, const MlpVars& vars,
                              const ParamVector& params, const std::string& prefix = "");

/// Same, but accumulating into an existing gradient vector (multi-network
/// parameter vectors: flow blocks).
void collect_mlp_grads_into(const ad::Tape& tape, const MlpVars& vars, const std::string& prefix,
                            ParamVector& grad);

}  // namespace gdaflow
