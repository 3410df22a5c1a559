#include "vlg/video_stream.hpp"

#include <algorithm>
#include <cmath>

#include "vlg/error.hpp"
#include "vlg/ops.hpp"

namespace vlg {

double sinusoid(std::size_t position, std::size_t channel, std::size_t width) {
  const double pair = static_cast<double>(channel / 2 * 2);
  const double angle = static_cast<double>(position) / std::pow(10000.0, pair / static_cast<double>(width));
  return channel % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

template <typename T>
Tensor<T> positional_encoding_1d(std::size_t n, std::size_t c) {
  if (c == 0 || c % 2 != 0) throw ConfigError("positional encoding width must be even, got " + std::to_string(c));
  std::vector<T> values(c * n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) values[ch * n + p] = static_cast<T>(sinusoid(p, ch, c));
  return Tensor<T>::from({c, n}, std::move(values));
}

std::size_t VideoStreamConfig::bottleneck_width() const {
  return bottleneck ? bottleneck : std::max<std::size_t>(1, hidden_width / 4);
}

void VideoStreamConfig::validate() const {
  if (input_width == 0 || hidden_width == 0 || blocks == 0 || knn_k == 0 || cardinality == 0) {
    throw ConfigError("video stream: widths, block count, k and cardinality must be positive");
  }
  if (input_width % 2 != 0) throw ConfigError("video stream: input width must be even for the positional encoding");
  if (bottleneck_width() * cardinality > 4 * hidden_width) {
    throw ConfigError("video stream: bottleneck * cardinality exceeds 4c");
  }
}

template <typename T>
InputProjection<T> InputProjection<T>::create(ParameterSet<T>& params, const std::string& prefix,
                                              std::size_t in_width, std::size_t out_width, Rng& rng) {
  InputProjection p;
  p.kernel = params.add(prefix + ".kernel", glorot_uniform<T>({out_width, in_width, 1}, in_width, out_width, rng));
  p.bias = params.add(prefix + ".bias", Tensor<T>::zeros({out_width}));
  return p;
}

template <typename T>
Tensor<T> InputProjection<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.dim(0) != kernel.dim(1)) {
    throw DimensionError("input projection expects " + std::to_string(kernel.dim(1)) + " channels, got " +
                         shape_str(x.shape()));
  }
  return relu(conv1d(x, kernel, bias));
}

template <typename T>
EdgeConvBranch<T> EdgeConvBranch<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                                            std::size_t cardinality, std::size_t bottleneck, Rng& rng) {
  EdgeConvBranch branch;
  branch.width = width;
  for (std::size_t p = 0; p < cardinality; ++p) {
    const std::string name = prefix + ".path" + std::to_string(p);
    Path path;
    path.w_in = params.add(name + ".w_in", glorot_uniform<T>({bottleneck, 2 * width}, 2 * width, bottleneck, rng));
    path.b_in = params.add(name + ".b_in", Tensor<T>::zeros({bottleneck, 1}));
    path.w_mid = params.add(name + ".w_mid", glorot_uniform<T>({bottleneck, bottleneck}, bottleneck, bottleneck, rng));
    path.b_mid = params.add(name + ".b_mid", Tensor<T>::zeros({bottleneck, 1}));
    path.w_out = params.add(name + ".w_out", glorot_uniform<T>({width, bottleneck}, bottleneck, width, rng));
    path.b_out = params.add(name + ".b_out", Tensor<T>::zeros({width, 1}));
    branch.paths.push_back(std::move(path));
  }
  return branch;
}

template <typename T>
Tensor<T> EdgeConvBranch<T>::forward(const Tensor<T>& x, const EdgeSet& edges) const {
  const std::size_t c = x.dim(0), n = x.dim(1);
  if (edges.node_count != n) {
    throw DimensionError(std::string(edge_type_name(edges.type)) + " edges cover " +
                         std::to_string(edges.node_count) + " nodes, features have " + std::to_string(n));
  }
  if (c != width) throw DimensionError("edge convolution width " + std::to_string(width) + " vs input " +
                                       shape_str(x.shape()));
  if (edges.empty()) return Tensor<T>::zeros({c, n});
  const auto flat = edges.flatten();
  const Tensor<T> pairs = concat<T>({gather_columns(x, flat.source), gather_columns(x, flat.target)}, 0);
  Tensor<T> merged;
  for (const auto& path : paths) {
    Tensor<T> h = relu(add(matmul(path.w_in, pairs), path.b_in));
    h = relu(add(matmul(path.w_mid, h), path.b_mid));
    h = add(matmul(path.w_out, h), path.b_out);
    merged = merged.defined() ? add(merged, h) : h;
  }
  return scatter_add_columns(merged, flat.target, n);
}

template <typename T>
Tensor<T> gcnext_forward(const Tensor<T>& x, const EdgeSet& ordering, const EdgeSet& semantic,
                         const GcnextParams<T>& params) {
  if (x.rank() != 2) throw DimensionError("GCNeXt expects [c x n] features, got " + shape_str(x.shape()));
  const Tensor<T> f_order = params.ordering.forward(x, ordering);
  const Tensor<T> f_sem = params.semantic.forward(x, semantic);
  return relu(add(add(f_order, f_sem), x));
}

template <typename T>
EdgeSet dynamic_semantic_edges(const Tensor<T>& features, std::size_t k) {
  const std::size_t n = features.dim(1);
  const std::size_t k_eff = std::min(k, n - 1);
  if (k_eff == 0) return EdgeSet::none(EdgeType::kSemantic, n);
  return build_semantic_edges(features, k_eff);
}

template <typename T>
VideoStream<T>::VideoStream(ParameterSet<T>& params, const VideoStreamConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  projection_ = InputProjection<T>::create(params, "video.proj", config_.input_width, config_.hidden_width, rng);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string prefix = "video.gcnext" + std::to_string(b);
    GcnextParams<T> block;
    block.ordering = EdgeConvBranch<T>::create(params, prefix + ".ordering", config_.hidden_width,
                                               config_.cardinality, config_.bottleneck_width(), rng);
    block.semantic = EdgeConvBranch<T>::create(params, prefix + ".semantic", config_.hidden_width,
                                               config_.cardinality, config_.bottleneck_width(), rng);
    blocks_.push_back(std::move(block));
  }
}

template <typename T>
Tensor<T> VideoStream<T>::forward(const Tensor<T>& features) const {
  if (features.rank() != 2 || features.dim(0) != config_.input_width) {
    throw DimensionError("video stream expects " + std::to_string(config_.input_width) + " x n_v features, got " +
                         shape_str(features.shape()));
  }
  const std::size_t n = features.dim(1);
  const Tensor<T> encoded =
      config_.positional_encoding ? add(features, positional_encoding_1d<T>(n, config_.input_width)) : features;
  Tensor<T> x = projection_.forward(encoded);
  const EdgeSet ordering = build_ordering_edges(n, config_.bidirectional_ordering);
  for (const auto& block : blocks_) {
    const EdgeSet semantic = dynamic_semantic_edges(x, config_.knn_k);
    x = gcnext_forward(x, ordering, semantic, block);
  }
  return x;
}

#define VLG_INSTANTIATE_VIDEO(T)                                                                              \
  template Tensor<T> positional_encoding_1d<T>(std::size_t, std::size_t);                                     \
  template struct InputProjection<T>;                                                                         \
  template struct EdgeConvBranch<T>;                                                                          \
  template Tensor<T> gcnext_forward(const Tensor<T>&, const EdgeSet&, const EdgeSet&, const GcnextParams<T>&); \
  template EdgeSet dynamic_semantic_edges(const Tensor<T>&, std::size_t);                                     \
  template class VideoStream<T>;

VLG_INSTANTIATE_VIDEO(float)
VLG_INSTANTIATE_VIDEO(double)

}  // namespace vlg
