#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vlg/tensor.hpp"

namespace vlg {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Ordered registry of trainable tensors. Registration order is the
// serialization and optimizer order.
template <typename T>
class ParameterSet {
 public:
  // Marks `value` as requiring a gradient and registers it. Duplicate names throw.
  Tensor<T> add(std::string name, Tensor<T> value);

  const std::vector<NamedTensor<T>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  bool contains(std::string_view name) const;
  Tensor<T> get(std::string_view name) const;

  void zero_grad();

 private:
  std::vector<NamedTensor<T>> entries_;
};

using Rng = std::mt19937_64;

// Glorot-uniform draw with explicit fan sizes.
template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <typename T>
Tensor<T> uniform(Shape shape, double bound, Rng& rng);

}  // namespace vlg
