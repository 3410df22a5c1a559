#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlg/tensor.hpp"

// Differentiable tensor operations. Every function records a tape entry when
// any input requires a gradient (and grad mode is on).
namespace vlg {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Numpy-style broadcasting (right-aligned, extent 1 stretches).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// relu'(0) is taken as 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

// Half-open range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end);

// Matrix ops over columns: out[:, e] = a[:, index[e]].
template <typename T>
Tensor<T> gather_columns(const Tensor<T>& a, std::span<const std::size_t> index);
// out[:, index[e]] += a[:, e], out has `columns` columns.
template <typename T>
Tensor<T> scatter_add_columns(const Tensor<T>& a, std::span<const std::size_t> index, std::size_t columns);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);
// Reduces `axis` to extent 1.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis);

// Softmax along `axis` with per-slice max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

// Softmax over groups of entries of a flat score vector: entries sharing
// segment[e] are normalized together. Empty segments are allowed.
template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, std::span<const std::size_t> segment, std::size_t segments);

// x: [c_in x n], kernel: [c_out x c_in x k], bias: [c_out]. Odd k, zero padding
// of (k-1)/2 on both ends, so the output is [c_out x n].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias);

// Mean binary cross-entropy on logits, computed as
// max(z,0) - z*t + log1p(exp(-|z|)). Targets are constants in [0, 1].
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace vlg
