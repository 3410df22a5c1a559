#include "vlg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vlg {

GradCheckReport grad_check(const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  for (auto& input : inputs) {
    input.set_requires_grad(true);
    input.clear_grad();
  }

  const Tensor<double> out = fn();
  if (out.numel() != 1) {
    report.message = "function output has shape " + shape_str(out.shape()) + ", expected a scalar";
    return report;
  }
  if (!std::isfinite(out.item())) {
    report.message = "function output is not finite";
    return report;
  }
  backward(out);

  std::vector<std::vector<double>> analytic;
  for (const auto& input : inputs) {
    if (input.has_grad()) {
      analytic.emplace_back(input.grad().begin(), input.grad().end());
    } else {
      analytic.emplace_back(input.numel(), 0.0);
    }
  }

  NoGradGuard no_grad;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    auto values = inputs[which].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double plus = fn().item();
      values[i] = saved - options.eps;
      const double minus = fn().item();
      values[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        std::ostringstream msg;
        msg << "non-finite output while perturbing input " << which << " coordinate " << i;
        report.message = msg.str();
        report.passed = false;
        report.worst_input = which;
        report.worst_coordinate = i;
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[which][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_relative_error || (which == 0 && i == 0)) {
        report.max_relative_error = rel;
        report.worst_input = which;
        report.worst_coordinate = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  std::ostringstream msg;
  msg << "max relative error " << report.max_relative_error << " at input " << report.worst_input
      << " coordinate " << report.worst_coordinate << " (analytic " << report.worst_analytic << ", numeric "
      << report.worst_numeric << ")";
  report.message = msg.str();
  return report;
}

}  // namespace vlg
