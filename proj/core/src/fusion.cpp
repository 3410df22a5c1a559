#include "vlg/fusion.hpp"

#include "vlg/error.hpp"
#include "vlg/ops.hpp"
#include "vlg/video_stream.hpp"

namespace vlg {

namespace {

template <typename T>
Tensor<T> as_column(const Tensor<T>& query, std::size_t width, const char* op) {
  if (query.numel() != width) {
    throw DimensionError(std::string(op) + ": query " + shape_str(query.shape()) + " does not match width " +
                         std::to_string(width));
  }
  return query.rank() == 2 && query.dim(1) == 1 ? query : reshape(query, {width, 1});
}

template <typename T>
Tensor<T> pair_scores(const Tensor<T>& x, const EdgeSet::Flat& edges) {
  return sum_axis(mul(gather_columns(x, edges.source), gather_columns(x, edges.target)), 0);
}

template <typename T>
Tensor<T> relational_term(const Tensor<T>& x, const EdgeSet::Flat& edges, const Tensor<T>& weights,
                          const Tensor<T>& weight_matrix, std::size_t nodes) {
  const Tensor<T> scaled = mul(gather_columns(x, edges.source), weights);
  const Tensor<T> pairs = concat<T>({scaled, gather_columns(x, edges.target)}, 0);
  return scatter_add_columns(matmul(weight_matrix, pairs), edges.target, nodes);
}

using Dense = std::vector<std::vector<double>>;

Dense dense_zeros(std::size_t rows, std::size_t cols) { return Dense(rows, std::vector<double>(cols, 0.0)); }

Dense dense_product(const Dense& a, const Dense& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Dense out = dense_zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][p] * b[p][j];
  return out;
}

void dense_accumulate(Dense& into, const Dense& term) {
  for (std::size_t i = 0; i < into.size(); ++i)
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i][j] += term[i][j];
}

// Weight matrix [c x 2c] split into the transposed halves acting on the
// neighbor part and the self part of [w x_j || x_i].
template <typename T>
std::pair<Dense, Dense> split_transposed(const Tensor<T>& weight) {
  const std::size_t c = weight.dim(0);
  Dense neighbor = dense_zeros(c, c), self = dense_zeros(c, c);
  for (std::size_t o = 0; o < c; ++o) {
    for (std::size_t i = 0; i < c; ++i) {
      neighbor[i][o] = static_cast<double>(weight.at(o, i));
      self[i][o] = static_cast<double>(weight.at(o, c + i));
    }
  }
  return {neighbor, self};
}

// A * S X W_neighbor + D X W_self for one relation, nodes as rows.
template <typename T>
Dense dense_relation(const Dense& x_rows, const EdgeSet::Flat& edges, const Tensor<T>& scalars,
                     const Tensor<T>& weight, std::size_t nodes) {
  Dense scaled_adjacency = dense_zeros(nodes, nodes);
  Dense degree = dense_zeros(nodes, nodes);
  for (std::size_t e = 0; e < edges.source.size(); ++e) {
    scaled_adjacency[edges.target[e]][edges.source[e]] += static_cast<double>(scalars[e]);
    degree[edges.target[e]][edges.target[e]] += 1.0;
  }
  const auto [w_neighbor, w_self] = split_transposed(weight);
  Dense out = dense_product(dense_product(scaled_adjacency, x_rows), w_neighbor);
  dense_accumulate(out, dense_product(dense_product(degree, x_rows), w_self));
  return out;
}

}  // namespace

template <typename T>
MatchingGraph<T> assemble_matching_graph(const Tensor<T>& video, const Tensor<T>& language, std::size_t k,
                                         const EdgeToggles& toggles) {
  if (video.rank() != 2 || language.rank() != 2 || video.dim(0) != language.dim(0)) {
    throw DimensionError("matching graph: video " + shape_str(video.shape()) + " and language " +
                         shape_str(language.shape()) + " must share the channel width");
  }
  MatchingGraph<T> graph;
  graph.video_nodes = video.dim(1);
  graph.token_nodes = language.dim(1);
  graph.toggles = toggles;
  graph.features = concat<T>({video, language}, 1);
  const std::size_t n = graph.node_count();
  graph.ordering = toggles.ordering ? disjoint_union(build_ordering_edges(graph.video_nodes, true),
                                                     build_ordering_edges(graph.token_nodes, true))
                                    : EdgeSet::none(EdgeType::kOrdering, n);
  if (toggles.semantic) {
    NoGradGuard no_grad;
    graph.semantic = disjoint_union(dynamic_semantic_edges(video.detach(), k),
                                    dynamic_semantic_edges(language.detach(), k));
  } else {
    graph.semantic = EdgeSet::none(EdgeType::kSemantic, n);
  }
  graph.matching = toggles.matching ? build_matching_edges(graph.video_nodes, graph.token_nodes)
                                    : EdgeSet::none(EdgeType::kMatching, n);
  return graph;
}

template <typename T>
EdgeScalars<T> compute_edge_scalars(const MatchingGraph<T>& graph) {
  EdgeScalars<T> out;
  const std::size_t n = graph.node_count();
  out.semantic_edges = graph.semantic.flatten();
  out.matching_edges = graph.matching.flatten();
  if (!out.semantic_edges.source.empty()) {
    out.semantic_scores = pair_scores(graph.features, out.semantic_edges);
    out.beta = segment_softmax(out.semantic_scores, out.semantic_edges.target, n);
  }
  if (!out.matching_edges.source.empty()) {
    out.matching_scores = pair_scores(graph.features, out.matching_edges);
    out.gamma = segment_softmax(out.matching_scores, out.matching_edges.target, n);
  }
  return out;
}

template <typename T>
FusionParams<T> FusionParams<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                                        const EdgeToggles& toggles, Rng& rng) {
  FusionParams p;
  if (toggles.ordering) {
    p.ordering_kernel =
        params.add(prefix + ".ordering.kernel", glorot_uniform<T>({width, width, 3}, 3 * width, 3 * width, rng));
    p.ordering_bias = params.add(prefix + ".ordering.bias", Tensor<T>::zeros({width}));
  }
  if (toggles.semantic) {
    p.semantic_weight =
        params.add(prefix + ".semantic.weight", glorot_uniform<T>({width, 2 * width}, 2 * width, width, rng));
  }
  if (toggles.matching) {
    p.matching_weight =
        params.add(prefix + ".matching.weight", glorot_uniform<T>({width, 2 * width}, 2 * width, width, rng));
  }
  return p;
}

template <typename T>
GraphMatchOutput<T> graph_match_forward(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                        const FusionParams<T>& params, bool relu_output) {
  const Tensor<T>& x = graph.features;
  const std::size_t n_v = graph.video_nodes, n = graph.node_count();
  Tensor<T> out = x;
  if (graph.toggles.ordering) {
    if (!params.ordering_kernel.defined()) throw ConfigError("graph matching: ordering term has no parameters");
    const Tensor<T> video_conv = conv1d(slice(x, 1, 0, n_v), params.ordering_kernel, params.ordering_bias);
    const Tensor<T> token_conv = conv1d(slice(x, 1, n_v, n), params.ordering_kernel, params.ordering_bias);
    out = add(out, concat<T>({video_conv, token_conv}, 1));
  }
  if (scalars.beta.defined()) {
    if (!params.semantic_weight.defined()) throw ConfigError("graph matching: semantic term has no parameters");
    out = add(out, relational_term(x, scalars.semantic_edges, scalars.beta, params.semantic_weight, n));
  }
  if (scalars.gamma.defined()) {
    if (!params.matching_weight.defined()) throw ConfigError("graph matching: matching term has no parameters");
    out = add(out, relational_term(x, scalars.matching_edges, scalars.gamma, params.matching_weight, n));
  }
  if (relu_output) out = relu(out);
  return {slice(out, 1, 0, n_v), slice(out, 1, n_v, n)};
}

template <typename T>
GraphMatchOutput<double> dense_reference_graph_match(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                                     const FusionParams<T>& params) {
  const std::size_t n = graph.node_count(), n_v = graph.video_nodes;
  const std::size_t c = graph.features.dim(0);
  Dense x_rows = dense_zeros(n, c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < n; ++i) x_rows[i][ch] = static_cast<double>(graph.features.at(ch, i));

  Dense out = x_rows;
  if (graph.toggles.ordering) {
    // Shift adjacencies for offsets -1, 0, +1 built from the ordering edges;
    // the kernel tap at offset o multiplies x_{i+o}.
    for (int offset = -1; offset <= 1; ++offset) {
      Dense shift = dense_zeros(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (offset == 0) {
          shift[i][i] = 1.0;
          continue;
        }
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + offset;
        if (j >= 0 && j < static_cast<std::ptrdiff_t>(n) && graph.ordering.has_edge(static_cast<std::size_t>(j), i)) {
          shift[i][static_cast<std::size_t>(j)] = 1.0;
        }
      }
      Dense tap = dense_zeros(c, c);
      for (std::size_t o = 0; o < c; ++o)
        for (std::size_t in = 0; in < c; ++in)
          tap[in][o] = static_cast<double>(params.ordering_kernel[(o * c + in) * 3 + static_cast<std::size_t>(offset + 1)]);
      dense_accumulate(out, dense_product(dense_product(shift, x_rows), tap));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < c; ++o) out[i][o] += static_cast<double>(params.ordering_bias[o]);
  }
  if (scalars.beta.defined()) {
    dense_accumulate(out, dense_relation(x_rows, scalars.semantic_edges, scalars.beta, params.semantic_weight, n));
  }
  if (scalars.gamma.defined()) {
    dense_accumulate(out, dense_relation(x_rows, scalars.matching_edges, scalars.gamma, params.matching_weight, n));
  }

  std::vector<double> video(c * n_v), language(c * (n - n_v));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n_v; ++i) video[ch * n_v + i] = out[i][ch];
    for (std::size_t i = n_v; i < n; ++i) language[ch * (n - n_v) + (i - n_v)] = out[i][ch];
  }
  return {Tensor<double>::from({c, n_v}, std::move(video)), Tensor<double>::from({c, n - n_v}, std::move(language))};
}

template <typename T>
std::vector<std::vector<double>> token_snippet_matrix(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                                      bool pre_softmax) {
  const Tensor<T>& values = pre_softmax ? scalars.matching_scores : scalars.gamma;
  if (!values.defined()) throw ConfigError("graph has no matching edges");
  const std::size_t n_v = graph.video_nodes;
  std::vector<std::vector<double>> matrix(graph.token_nodes, std::vector<double>(n_v, 0.0));
  const auto& edges = scalars.matching_edges;
  for (std::size_t e = 0; e < edges.source.size(); ++e) {
    if (edges.target[e] < n_v) continue;
    matrix[edges.target[e] - n_v][edges.source[e]] = static_cast<double>(values[e]);
  }
  return matrix;
}

template <typename T>
Tensor<T> hadamard_snippet_fusion(const Tensor<T>& video, const Tensor<T>& query) {
  if (video.rank() != 2) throw DimensionError("hadamard fusion expects [c x n_v] snippets");
  return mul(video, as_column(query, video.dim(0), "hadamard fusion"));
}

template <typename T>
Tensor<T> concat_snippet_fusion(const Tensor<T>& video, const Tensor<T>& query, const Tensor<T>& proj) {
  if (video.rank() != 2) throw DimensionError("concat fusion expects [c x n_v] snippets");
  const std::size_t c = video.dim(0), n_v = video.dim(1);
  if (proj.rank() != 2 || proj.dim(1) != 2 * c) {
    throw DimensionError("concat fusion projection " + shape_str(proj.shape()) + " must map 2c = " +
                         std::to_string(2 * c) + " channels");
  }
  const Tensor<T> repeated = matmul(as_column(query, c, "concat fusion"), Tensor<T>::full({1, n_v}, T(1)));
  return relu(matmul(proj, concat<T>({video, repeated}, 0)));
}

#define VLG_INSTANTIATE_FUSION(T)                                                                                \
  template MatchingGraph<T> assemble_matching_graph(const Tensor<T>&, const Tensor<T>&, std::size_t,             \
                                                    const EdgeToggles&);                                         \
  template EdgeScalars<T> compute_edge_scalars(const MatchingGraph<T>&);                                         \
  template struct FusionParams<T>;                                                                               \
  template GraphMatchOutput<T> graph_match_forward(const MatchingGraph<T>&, const EdgeScalars<T>&,               \
                                                   const FusionParams<T>&, bool);                                \
  template GraphMatchOutput<double> dense_reference_graph_match(const MatchingGraph<T>&, const EdgeScalars<T>&,  \
                                                                const FusionParams<T>&);                         \
  template std::vector<std::vector<double>> token_snippet_matrix(const MatchingGraph<T>&, const EdgeScalars<T>&, \
                                                                 bool);                                          \
  template Tensor<T> hadamard_snippet_fusion(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> concat_snippet_fusion(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

VLG_INSTANTIATE_FUSION(float)
VLG_INSTANTIATE_FUSION(double)

}  // namespace vlg
