#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace deci {

// One tensor to probe: f() must re-evaluate the scalar loss using the
// current contents of *values, and analytic_grad must hold d(loss)/d(values)
// as produced by the implementation under test.
struct GradCheckParam {
  std::string name;
  std::vector<double>* values = nullptr;
  const std::vector<double>* analytic_grad = nullptr;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t n_checked = 0;

  bool within(double tol) const { return max_rel_err < tol; }
  std::string describe() const;
};

// Central finite differences: n_i = (f(x_i + h) - f(x_i - h)) / (2h), with
// relative error |a_i - n_i| / max(|a_i|, |n_i|, 1e-8) per element. Every
// element of every listed tensor is probed; values are restored bitwise.
GradCheckReport grad_check(const std::function<double()>& f,
                           std::span<GradCheckParam> params, double h = 1e-5);

}  // namespace deci
