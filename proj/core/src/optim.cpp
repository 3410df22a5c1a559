#include "vlg/optim.hpp"

#include <cmath>

#include "vlg/error.hpp"

namespace vlg {

template <typename T>
Adam<T>::Adam(const ParameterSet<T>& params, AdamOptions options)
    : params_(&params), options_(options), lr_(options.learning_rate) {
  if (options_.learning_rate <= 0) throw ConfigError("Adam: learning rate must be positive");
  if (options_.decay_factor <= 0) throw ConfigError("Adam: decay factor must be positive");
  for (const auto& entry : params.entries()) {
    first_moment_.emplace_back(entry.tensor.numel(), 0.0);
    second_moment_.emplace_back(entry.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  const auto& entries = params_->entries();
  if (entries.size() != first_moment_.size()) throw ConfigError("Adam: parameter set changed after construction");
  for (const auto& entry : entries) {
    if (!entry.tensor.has_grad()) throw ConfigError("Adam: parameter '" + entry.name + "' has no gradient");
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor<T> param = entries[p].tensor;
    auto values = param.mutable_data();
    const auto grad = param.grad();
    auto& m = first_moment_[p];
    auto& v = second_moment_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] = static_cast<T>(static_cast<double>(values[i]) - lr_ * m_hat / (std::sqrt(v_hat) + options_.epsilon));
    }
  }
  if (options_.decay_interval > 0 && step_ % options_.decay_interval == 0) lr_ *= options_.decay_factor;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace vlg
