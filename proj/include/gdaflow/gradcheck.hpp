#pragma once

#include <functional>

#include "gdaflow/mlp.hpp"

namespace gdaflow {

/// Per-coordinate record of a finite-difference comparison.
struct FiniteDiffEntry {
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;        // one-sided slopes disagree (relu-style nondifferentiable point)
  bool non_finite = false;  // loss was non-finite at a perturbed point
};

struct FiniteDiffReport {
  /// max over non-flagged coordinates of |analytic - central| / max(1, |analytic|)
  double max_rel_error = 0.0;
  size_t worst_index = 0;
  int kink_count = 0;
  int non_finite_count = 0;
  std::vector<FiniteDiffEntry> entries;
};

/// Central finite-difference check of an analytic gradient. Coordinates where
/// the loss hits a nondifferentiable point (forward and backward slopes
/// disagree beyond tolerance) or turns non-finite are flagged and excluded
/// from the reported bound.
FiniteDiffReport finite_diff_check(const std::function<double(const ParamVector&)>& f,
                                   const ParamVector& params, const ParamVector& analytic_grad,
                                   double eps);

}  // namespace gdaflow
