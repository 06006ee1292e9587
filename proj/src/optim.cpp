#include "gdaflow/optim.hpp"

#include <cmath>

namespace gdaflow {

OptimState OptimState::init(const ParamVector& params, OptimConfig config) {
  OptimState s;
  s.config = config;
  s.m.assign(params.size(), 0.0);
  s.v.assign(params.size(), 0.0);
  s.step = 0;
  return s;
}

std::pair<ParamVector, OptimState> optimizer_step(const ParamVector& params,
                                                  const ParamVector& grads,
                                                  const OptimState& state) {
  const size_t n = params.size();
  if (grads.size() != n)
    throw std::invalid_argument("optimizer_step: gradient has " + std::to_string(grads.size()) +
                                " entries, parameters have " + std::to_string(n));
  if (state.m.size() != n || state.v.size() != n)
    throw std::invalid_argument("optimizer_step: state shape does not match parameters");
  for (double g : grads.values)
    if (!std::isfinite(g))
      throw std::runtime_error("optimizer_step: non-finite gradient, step rejected");

  ParamVector out = params;
  OptimState st = state;
  st.step += 1;
  const OptimConfig& c = st.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (size_t k = 0; k < n; ++k) {
    const double g = grads.values[k];
    st.m[k] = c.beta1 * st.m[k] + (1.0 - c.beta1) * g;
    st.v[k] = c.beta2 * st.v[k] + (1.0 - c.beta2) * g * g;
    const double mhat = st.m[k] / bc1;
    const double vhat = st.v[k] / bc2;
    double p = out.values[k] * (1.0 - c.lr * c.weight_decay);
    p -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    out.values[k] = p;
  }
  return {std::move(out), std::move(st)};
}

}  // namespace gdaflow
