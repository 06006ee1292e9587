#include "gdaflow/gradcheck.hpp"

#include <cmath>

namespace gdaflow {

FiniteDiffReport finite_diff_check(const std::function<double(const ParamVector&)>& f,
                                   const ParamVector& params, const ParamVector& analytic_grad,
                                   double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be > 0");
  if (analytic_grad.size() != params.size())
    throw std::invalid_argument("finite_diff_check: gradient/parameter size mismatch");

  FiniteDiffReport report;
  ParamVector p = params;
  const double f0 = f(p);
  for (size_t k = 0; k < p.size(); ++k) {
    const double saved = p.values[k];
    p.values[k] = saved + eps;
    const double fp = f(p);
    p.values[k] = saved - eps;
    const double fm = f(p);
    p.values[k] = saved;

    FiniteDiffEntry e;
    e.index = k;
    e.analytic = analytic_grad.values[k];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      e.non_finite = true;
      report.non_finite_count += 1;
      report.entries.push_back(e);
      continue;
    }
    e.numeric = (fp - fm) / (2.0 * eps);
    const double fwd = (fp - f0) / eps;
    const double bwd = (f0 - fm) / eps;
    const double scale = std::max({1.0, std::abs(fwd), std::abs(bwd)});
    if (std::abs(fwd - bwd) > 1e-2 * scale) {
      e.kink = true;
      report.kink_count += 1;
      report.entries.push_back(e);
      continue;
    }
    e.rel_error = std::abs(e.analytic - e.numeric) / std::max(1.0, std::abs(e.analytic));
    if (e.rel_error > report.max_rel_error) {
      report.max_rel_error = e.rel_error;
      report.worst_index = k;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace gdaflow
