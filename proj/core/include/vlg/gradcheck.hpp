#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vlg/tensor.hpp"

namespace vlg {

struct GradCheckOptions {
  double eps = 1e-6;
  double tolerance = 1e-4;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-3;
};

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string message;
};

// Compares the reverse-mode gradient of a scalar function of `inputs` against
// central finite differences, coordinate by coordinate. `fn` must rebuild its
// result from the current input values on every call.
GradCheckReport grad_check(const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace vlg
