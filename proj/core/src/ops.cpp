#include "vlg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vlg/error.hpp"

namespace vlg {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(shape));
  }
}

// Row-major strides of `shape` expanded to `rank` dims; broadcast dims get 0.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const std::size_t src_axis = shape.size() - 1 - i;
    const std::size_t dst_axis = rank - 1 - i;
    strides[dst_axis] = shape[src_axis] == 1 ? 0 : stride;
    stride *= shape[src_axis];
  }
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    }
    out[rank - 1 - i] = std::max(ea, eb);
  }
  return out;
}

// For each flat output index, the flat index into a broadcast operand.
std::vector<std::size_t> broadcast_index(const Shape& shape, const Shape& out) {
  const std::size_t total = shape_numel(out);
  std::vector<std::size_t> index(total);
  if (shape == out) {
    for (std::size_t i = 0; i < total; ++i) index[i] = i;
    return index;
  }
  const auto strides = broadcast_strides(shape, out);
  std::vector<std::size_t> counter(out.size(), 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < total; ++i) {
    index[i] = offset;
    for (std::size_t axis = out.size(); axis-- > 0;) {
      ++counter[axis];
      offset += strides[axis];
      if (counter[axis] < out[axis]) break;
      offset -= strides[axis] * counter[axis];
      counter[axis] = 0;
    }
  }
  return index;
}

enum class Binary { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind, const char* name) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  const std::size_t total = shape_numel(out_shape);
  auto ia = broadcast_index(a.shape(), out_shape);
  auto ib = broadcast_index(b.shape(), out_shape);
  const auto va = a.data();
  const auto vb = b.data();
  std::vector<T> out(total);
  for (std::size_t i = 0; i < total; ++i) {
    const T x = va[ia[i]];
    const T y = vb[ib[i]];
    out[i] = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
  }
  NodePtr<T> pa = a.node_ptr();
  NodePtr<T> pb = b.node_ptr();
  return make_result<T>(out_shape, std::move(out), {pa, pb},
                        [ia = std::move(ia), ib = std::move(ib), kind](Node<T>& self) {
                          Node<T>& na = *self.parents[0];
                          Node<T>& nb = *self.parents[1];
                          const auto& g = self.grad;
                          if (na.requires_grad) {
                            auto ga = na.grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              ga[ia[i]] += kind == Binary::kMul ? g[i] * nb.value[ib[i]] : g[i];
                            }
                          }
                          if (nb.requires_grad) {
                            auto gb = nb.grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[ib[i]] += kind == Binary::kMul   ? g[i] * na.value[ia[i]]
                                           : kind == Binary::kSub ? -g[i]
                                                                  : g[i];
                            }
                          }
                        });
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv_from_output) {
  std::vector<T> out(a.numel());
  const auto va = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[i]);
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr()}, [deriv_from_output](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    auto ga = na.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i] * deriv_from_output(na.value[i], self.value[i]);
    }
  });
}

// Views a tensor as [outer x extent x inner] around `axis`.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents disagree for " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  const auto va = a.data();
  const auto vb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = va[i * k + p];
      if (s == T(0)) continue;
      const T* brow = vb.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, [m, k, n](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      // dA = G B^T
      auto ga = na.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          const T* grow = g.data() + i * n;
          const T* brow = nb.value.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      // dB = A^T G
      auto gb = nb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = na.value[i * k + p];
          if (s == T(0)) continue;
          T* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  const auto va = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = va[i * c + j];
  return make_result<T>({c, r}, std::move(out), {a.node_ptr()}, [r, c](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return make_result<T>(std::move(shape), a.to_vector(), {a.node_ptr()}, [](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kAdd, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kSub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kMul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw DimensionError("concat: axis out of range for " + shape_str(out_shape));
  std::size_t total_extent = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == out_shape.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == out_shape[i];
    if (!ok) {
      throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(out_shape) + " on axis " +
                           std::to_string(axis));
    }
    total_extent += s[axis];
  }
  out_shape[axis] = total_extent;
  const AxisView view = axis_view(out_shape, axis, "concat");
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::vector<NodePtr<T>> parents;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t extent = p.shape()[axis];
    const auto vp = p.data();
    for (std::size_t o = 0; o < view.outer; ++o) {
      std::copy_n(vp.data() + o * extent * view.inner, extent * view.inner,
                  out.data() + (o * view.extent + offset) * view.inner);
    }
    offsets.push_back(offset);
    parents.push_back(p.node_ptr());
    offset += extent;
  }
  return make_result<T>(out_shape, std::move(out), std::move(parents),
                        [view, offsets = std::move(offsets), axis](Node<T>& self) {
                          for (std::size_t idx = 0; idx < self.parents.size(); ++idx) {
                            Node<T>& np = *self.parents[idx];
                            if (!np.requires_grad) continue;
                            const std::size_t extent = np.shape[axis];
                            auto gp = np.grad_buffer();
                            for (std::size_t o = 0; o < view.outer; ++o) {
                              const T* src = self.grad.data() + (o * view.extent + offsets[idx]) * view.inner;
                              T* dst = gp.data() + o * extent * view.inner;
                              for (std::size_t i = 0; i < extent * view.inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisView view = axis_view(a.shape(), axis, "slice");
  if (begin >= end || end > view.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                         shape_str(a.shape()) + " axis " + std::to_string(axis));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t width = (end - begin) * view.inner;
  std::vector<T> out(shape_numel(out_shape));
  const auto va = a.data();
  for (std::size_t o = 0; o < view.outer; ++o) {
    std::copy_n(va.data() + (o * view.extent + begin) * view.inner, width, out.data() + o * width);
  }
  return make_result<T>(out_shape, std::move(out), {a.node_ptr()}, [view, begin, width](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < view.outer; ++o) {
      T* dst = ga.data() + (o * view.extent + begin) * view.inner;
      const T* src = self.grad.data() + o * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Tensor<T> gather_columns(const Tensor<T>& a, std::span<const std::size_t> index) {
  require_rank(a.shape(), 2, "gather_columns");
  const std::size_t rows = a.dim(0), cols = a.dim(1), e = index.size();
  if (e == 0) throw DimensionError("gather_columns: empty index");
  for (auto i : index) {
    if (i >= cols) throw DimensionError("gather_columns: index " + std::to_string(i) + " >= " + std::to_string(cols));
  }
  std::vector<T> out(rows * e);
  const auto va = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < e; ++j) out[r * e + j] = va[r * cols + index[j]];
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result<T>({rows, e}, std::move(out), {a.node_ptr()},
                        [rows, cols, idx = std::move(idx)](Node<T>& self) {
                          auto ga = self.parents[0]->grad_buffer();
                          const std::size_t e = idx.size();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < e; ++j) ga[r * cols + idx[j]] += self.grad[r * e + j];
                        });
}

template <typename T>
Tensor<T> scatter_add_columns(const Tensor<T>& a, std::span<const std::size_t> index, std::size_t columns) {
  require_rank(a.shape(), 2, "scatter_add_columns");
  const std::size_t rows = a.dim(0), e = a.dim(1);
  if (index.size() != e) {
    throw DimensionError("scatter_add_columns: " + std::to_string(index.size()) + " indices for " +
                         std::to_string(e) + " columns");
  }
  for (auto i : index) {
    if (i >= columns) {
      throw DimensionError("scatter_add_columns: index " + std::to_string(i) + " >= " + std::to_string(columns));
    }
  }
  std::vector<T> out(rows * columns, T(0));
  const auto va = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < e; ++j) out[r * columns + index[j]] += va[r * e + j];
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result<T>({rows, columns}, std::move(out), {a.node_ptr()},
                        [rows, columns, idx = std::move(idx)](Node<T>& self) {
                          auto ga = self.parents[0]->grad_buffer();
                          const std::size_t e = idx.size();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < e; ++j) ga[r * e + j] += self.grad[r * columns + idx[j]];
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T x : a.data()) total += x;
  return make_result<T>({}, {total}, {a.node_ptr()}, [](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    for (auto& g : ga) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis) {
  const AxisView view = axis_view(a.shape(), axis, "sum_axis");
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  std::vector<T> out(view.outer * view.inner, T(0));
  const auto va = a.data();
  for (std::size_t o = 0; o < view.outer; ++o)
    for (std::size_t e = 0; e < view.extent; ++e)
      for (std::size_t i = 0; i < view.inner; ++i)
        out[o * view.inner + i] += va[(o * view.extent + e) * view.inner + i];
  return make_result<T>(out_shape, std::move(out), {a.node_ptr()}, [view](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < view.outer; ++o)
      for (std::size_t e = 0; e < view.extent; ++e)
        for (std::size_t i = 0; i < view.inner; ++i)
          ga[(o * view.extent + e) * view.inner + i] += self.grad[o * view.inner + i];
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  const AxisView view = axis_view(a.shape(), axis, "softmax");
  std::vector<T> out(a.numel());
  const auto va = a.data();
  for (std::size_t o = 0; o < view.outer; ++o) {
    for (std::size_t i = 0; i < view.inner; ++i) {
      const std::size_t base = o * view.extent * view.inner + i;
      T peak = va[base];
      for (std::size_t e = 1; e < view.extent; ++e) peak = std::max(peak, va[base + e * view.inner]);
      T total = 0;
      for (std::size_t e = 0; e < view.extent; ++e) {
        const T z = std::exp(va[base + e * view.inner] - peak);
        out[base + e * view.inner] = z;
        total += z;
      }
      for (std::size_t e = 0; e < view.extent; ++e) out[base + e * view.inner] /= total;
    }
  }
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr()}, [view](Node<T>& self) {
    auto ga = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < view.outer; ++o) {
      for (std::size_t i = 0; i < view.inner; ++i) {
        const std::size_t base = o * view.extent * view.inner + i;
        T dot = 0;
        for (std::size_t e = 0; e < view.extent; ++e) dot += g[base + e * view.inner] * y[base + e * view.inner];
        for (std::size_t e = 0; e < view.extent; ++e) {
          const std::size_t at = base + e * view.inner;
          ga[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, std::span<const std::size_t> segment, std::size_t segments) {
  const std::size_t e = scores.numel();
  if (segment.size() != e) {
    throw DimensionError("segment_softmax: " + std::to_string(segment.size()) + " segment ids for " +
                         std::to_string(e) + " scores");
  }
  const auto vs = scores.data();
  std::vector<T> peak(segments, -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < e; ++i) {
    if (segment[i] >= segments) throw DimensionError("segment_softmax: segment id out of range");
    peak[segment[i]] = std::max(peak[segment[i]], vs[i]);
  }
  std::vector<T> total(segments, T(0));
  std::vector<T> out(e);
  for (std::size_t i = 0; i < e; ++i) {
    out[i] = std::exp(vs[i] - peak[segment[i]]);
    total[segment[i]] += out[i];
  }
  for (std::size_t i = 0; i < e; ++i) out[i] /= total[segment[i]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return make_result<T>(scores.shape(), std::move(out), {scores.node_ptr()},
                        [seg = std::move(seg), segments](Node<T>& self) {
                          auto gs = self.parents[0]->grad_buffer();
                          std::vector<T> dot(segments, T(0));
                          for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += self.grad[i] * self.value[i];
                          for (std::size_t i = 0; i < seg.size(); ++i) {
                            gs[i] += self.value[i] * (self.grad[i] - dot[seg[i]]);
                          }
                        });
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias) {
  require_rank(x.shape(), 2, "conv1d");
  require_rank(kernel.shape(), 3, "conv1d");
  const std::size_t c_in = x.dim(0), n = x.dim(1);
  const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(k));
  if (kernel.dim(1) != c_in) {
    throw DimensionError("conv1d: kernel " + shape_str(kernel.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  if (bias.numel() != c_out) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(c_out) +
                         " output channels");
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const auto vx = x.data();
  const auto vk = kernel.data();
  const auto vb = bias.data();
  std::vector<T> out(c_out * n);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t t = 0; t < n; ++t) out[o * n + t] = vb[o];
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      for (std::size_t tap = 0; tap < k; ++tap) {
        const T w = vk[(o * c_in + ci) * k + tap];
        if (w == T(0)) continue;
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap) - half;
        for (std::size_t t = 0; t < n; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
          out[o * n + t] += w * vx[ci * n + static_cast<std::size_t>(src)];
        }
      }
    }
  }
  return make_result<T>(
      {c_out, n}, std::move(out), {x.node_ptr(), kernel.node_ptr(), bias.node_ptr()},
      [c_in, c_out, n, k, half](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& nk = *self.parents[1];
        Node<T>& nb = *self.parents[2];
        const auto& g = self.grad;
        if (nb.requires_grad) {
          auto gb = nb.grad_buffer();
          for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t t = 0; t < n; ++t) gb[o] += g[o * n + t];
        }
        const bool want_x = nx.requires_grad;
        const bool want_k = nk.requires_grad;
        std::span<T> gx = want_x ? nx.grad_buffer() : std::span<T>{};
        std::span<T> gk = want_k ? nk.grad_buffer() : std::span<T>{};
        for (std::size_t o = 0; o < c_out; ++o) {
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t tap = 0; tap < k; ++tap) {
              const std::size_t widx = (o * c_in + ci) * k + tap;
              const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap) - half;
              T acc = 0;
              for (std::size_t t = 0; t < n; ++t) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
                const std::size_t s = static_cast<std::size_t>(src);
                if (want_k) acc += g[o * n + t] * nx.value[ci * n + s];
                if (want_x) gx[ci * n + s] += g[o * n + t] * nk.value[widx];
              }
              if (want_k) gk[widx] += acc;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.numel() != targets.numel()) {
    throw DimensionError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs targets " +
                         shape_str(targets.shape()));
  }
  const auto z = logits.data();
  const auto t = targets.data();
  const std::size_t m = z.size();
  T total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(t[i] >= T(0) && t[i] <= T(1))) {
      throw ValidationError("bce_with_logits: target " + std::to_string(static_cast<double>(t[i])) + " at index " +
                            std::to_string(i) + " is outside [0, 1]");
    }
    total += std::max(z[i], T(0)) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  std::vector<T> tv(t.begin(), t.end());
  return make_result<T>({}, {total / static_cast<T>(m)}, {logits.node_ptr()}, [tv = std::move(tv)](Node<T>& self) {
    Node<T>& nz = *self.parents[0];
    auto gz = nz.grad_buffer();
    const T scale_by = self.grad[0] / static_cast<T>(tv.size());
    for (std::size_t i = 0; i < tv.size(); ++i) {
      const T x = nz.value[i];
      const T p = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
      gz[i] += scale_by * (p - tv[i]);
    }
  });
}

#define VLG_INSTANTIATE_OPS(T)                                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> transpose(const Tensor<T>&);                                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                      \
  template Tensor<T> tanh(const Tensor<T>&);                                                         \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                             \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                 \
  template Tensor<T> gather_columns(const Tensor<T>&, std::span<const std::size_t>);                 \
  template Tensor<T> scatter_add_columns(const Tensor<T>&, std::span<const std::size_t>, std::size_t); \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> mean(const Tensor<T>&);                                                         \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> segment_softmax(const Tensor<T>&, std::span<const std::size_t>, std::size_t);   \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&);

VLG_INSTANTIATE_OPS(float)
VLG_INSTANTIATE_OPS(double)

}  // namespace vlg
