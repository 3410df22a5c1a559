#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlg/graphs.hpp"
#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

// Sinusoidal encoding value for one (position, channel) at the given width:
// channel 2i -> sin(p / 10000^(2i/width)), channel 2i+1 -> cos of the same.
double sinusoid(std::size_t position, std::size_t channel, std::size_t width);

// [c x n] table of sinusoid(); c must be even.
template <typename T>
Tensor<T> positional_encoding_1d(std::size_t n, std::size_t c);

struct VideoStreamConfig {
  std::size_t input_width = 0;   // c_v
  std::size_t hidden_width = 0;  // c
  std::size_t blocks = 1;        // b_v
  std::size_t knn_k = 3;
  std::size_t cardinality = 4;
  std::size_t bottleneck = 0;  // 0 -> hidden_width / 4
  bool bidirectional_ordering = true;
  bool positional_encoding = true;  // add the sinusoid table to the raw features

  std::size_t bottleneck_width() const;
  void validate() const;
};

// Kernel-size-1 convolution c_v -> c followed by ReLU.
template <typename T>
struct InputProjection {
  Tensor<T> kernel;  // [c x c_v x 1]
  Tensor<T> bias;    // [c]

  static InputProjection create(ParameterSet<T>& params, const std::string& prefix, std::size_t in_width,
                                std::size_t out_width, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
};

// Edge convolution with split-transform-merge paths. Every edge j -> i
// contributes sum_p W_out_p relu(W_mid_p relu(W_in_p [x_j || x_i] + b) + b) + b
// to node i.
template <typename T>
struct EdgeConvBranch {
  struct Path {
    Tensor<T> w_in;   // [d x 2c]
    Tensor<T> b_in;   // [d x 1]
    Tensor<T> w_mid;  // [d x d]
    Tensor<T> b_mid;  // [d x 1]
    Tensor<T> w_out;  // [c x d]
    Tensor<T> b_out;  // [c x 1]
  };
  std::vector<Path> paths;
  std::size_t width = 0;

  static EdgeConvBranch create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                               std::size_t cardinality, std::size_t bottleneck, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const EdgeSet& edges) const;
};

template <typename T>
struct GcnextParams {
  EdgeConvBranch<T> ordering;
  EdgeConvBranch<T> semantic;
};

// relu(F(X, ordering) + F(X, semantic) + X).
template <typename T>
Tensor<T> gcnext_forward(const Tensor<T>& x, const EdgeSet& ordering, const EdgeSet& semantic,
                         const GcnextParams<T>& params);

// k-NN edges on the current features, with k clamped to n-1 (none for n = 1).
template <typename T>
EdgeSet dynamic_semantic_edges(const Tensor<T>& features, std::size_t k);

template <typename T>
class VideoStream {
 public:
  VideoStream(ParameterSet<T>& params, const VideoStreamConfig& config, Rng& rng);

  // features: [c_v x n_v] raw snippet features.
  Tensor<T> forward(const Tensor<T>& features) const;

  const VideoStreamConfig& config() const { return config_; }
  const InputProjection<T>& projection() const { return projection_; }
  const std::vector<GcnextParams<T>>& blocks() const { return blocks_; }

 private:
  VideoStreamConfig config_;
  InputProjection<T> projection_;
  std::vector<GcnextParams<T>> blocks_;
};

}  // namespace vlg
