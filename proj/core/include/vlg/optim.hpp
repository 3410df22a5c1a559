#pragma once

#include <cstddef>
#include <vector>

#include "vlg/params.hpp"

namespace vlg {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // StepLR: the rate is multiplied by `decay_factor` every `decay_interval`
  // updates. An interval of 0 disables decay.
  std::size_t decay_interval = 0;
  double decay_factor = 1.0;
};

// Adam with bias correction and a step-decay learning-rate schedule.
template <typename T>
class Adam {
 public:
  Adam(const ParameterSet<T>& params, AdamOptions options);

  // Throws ConfigError naming the first parameter without a gradient.
  void step();

  std::size_t step_count() const { return step_; }
  double learning_rate() const { return lr_; }
  const AdamOptions& options() const { return options_; }

 private:
  const ParameterSet<T>* params_;
  AdamOptions options_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  std::size_t step_ = 0;
  double lr_;
};

}  // namespace vlg
