#pragma once

#include "gdaflow/mlp.hpp"

namespace gdaflow {

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: p *= (1 - lr*wd) before the moment update
};

/// Adaptive-moment optimizer state. Accumulator shapes match the parameter
/// vector; step counter starts at 0.
struct OptimState {
  OptimConfig config;
  std::vector<double> m;  // first moments
  std::vector<double> v;  // second moments
  long step = 0;

  static OptimState init(const ParamVector& params, OptimConfig config);
};

/// One decoupled-weight-decay Adam step. Rejects non-finite gradients and
/// shape mismatches; the input state is not modified.
std::pair<ParamVector, OptimState> optimizer_step(const ParamVector& params,
                                                  const ParamVector& grads,
                                                  const OptimState& state);

}  // namespace gdaflow
