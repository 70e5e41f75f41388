#include "deci/gradcheck.hpp"

#include <cmath>

#include "deci/types.hpp"

namespace deci {

std::string GradCheckReport::describe() const {
  return "max rel err " + std::to_string(max_rel_err) + " at " + worst_name +
         "[" + std::to_string(worst_index) + "] (analytic " +
         std::to_string(worst_analytic) + ", numeric " +
         std::to_string(worst_numeric) + ", " + std::to_string(n_checked) +
         " elements checked)";
}

GradCheckReport grad_check(const std::function<double()>& f,
                           std::span<GradCheckParam> params, double h) {
  if (!(h > 0.0)) {
    throw ConfigError("grad_check: step size must be positive");
  }
  GradCheckReport report;
  for (GradCheckParam& p : params) {
    if (p.values == nullptr || p.analytic_grad == nullptr) {
      throw ValidationError("grad_check: parameter '" + p.name +
                            "' has null value or gradient storage");
    }
    if (p.values->size() != p.analytic_grad->size()) {
      throw DimensionError("grad_check: parameter '" + p.name + "' has " +
                           std::to_string(p.values->size()) +
                           " values but " +
                           std::to_string(p.analytic_grad->size()) +
                           " gradient entries");
    }
    for (std::size_t i = 0; i < p.values->size(); ++i) {
      const double saved = (*p.values)[i];
      (*p.values)[i] = saved + h;
      const double up = f();
      (*p.values)[i] = saved - h;
      const double down = f();
      (*p.values)[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*p.analytic_grad)[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw NumericError("grad_check: non-finite derivative for '" + p.name +
                           "' at index " + std::to_string(i));
      }
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / denom;
      ++report.n_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_name = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace deci
