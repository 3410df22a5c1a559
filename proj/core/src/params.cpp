#include "vlg/params.hpp"

#include <cmath>

#include "vlg/error.hpp"

namespace vlg {

template <typename T>
Tensor<T> ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(true);
  entries_.push_back({std::move(name), value});
  return value;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
bool ParameterSet<T>::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

template <typename T>
Tensor<T> ParameterSet<T>::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform<T>(std::move(shape), bound, rng);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template Tensor<float> uniform(Shape, double, Rng&);
template Tensor<double> uniform(Shape, double, Rng&);
template Tensor<float> glorot_uniform(Shape, std::size_t, std::size_t, Rng&);
template Tensor<double> glorot_uniform(Shape, std::size_t, std::size_t, Rng&);

}  // namespace vlg
