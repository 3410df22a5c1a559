#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlg/graphs.hpp"
#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

struct EdgeToggles {
  bool ordering = true;
  bool semantic = true;
  bool matching = true;
};

// Joint snippet/token graph. Nodes [0, n_v) are snippets, [n_v, n_v + n_l) tokens.
template <typename T>
struct MatchingGraph {
  Tensor<T> features;  // [c x (n_v + n_l)]
  std::size_t video_nodes = 0;
  std::size_t token_nodes = 0;
  EdgeSet ordering;  // chain inside each modality
  EdgeSet semantic;  // k-NN inside each modality
  EdgeSet matching;  // dense bipartite
  EdgeToggles toggles;

  std::size_t node_count() const { return video_nodes + token_nodes; }
};

template <typename T>
MatchingGraph<T> assemble_matching_graph(const Tensor<T>& video, const Tensor<T>& language, std::size_t k,
                                         const EdgeToggles& toggles);

// Edge weights softmax(x_src^T x_dst) normalized over each target's neighborhood.
template <typename T>
struct EdgeScalars {
  EdgeSet::Flat semantic_edges;
  EdgeSet::Flat matching_edges;
  Tensor<T> semantic_scores;  // [1 x E_s] raw inner products
  Tensor<T> matching_scores;  // [1 x E_m]
  Tensor<T> beta;             // [1 x E_s], undefined when there are no semantic edges
  Tensor<T> gamma;            // [1 x E_m], undefined when there are no matching edges
};

template <typename T>
EdgeScalars<T> compute_edge_scalars(const MatchingGraph<T>& graph);

template <typename T>
struct FusionParams {
  Tensor<T> ordering_kernel;  // [c x c x 3]
  Tensor<T> ordering_bias;    // [c]
  Tensor<T> semantic_weight;  // [c x 2c], applied to [beta x_j || x_i]
  Tensor<T> matching_weight;  // [c x 2c], applied to [gamma x_j || x_i]

  // Only the terms enabled in `toggles` get parameters.
  static FusionParams create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                             const EdgeToggles& toggles, Rng& rng);
};

template <typename T>
struct GraphMatchOutput {
  Tensor<T> video;     // [c x n_v]
  Tensor<T> language;  // [c x n_l]
};

// Indexed form: per-segment kernel-3 convolution + sum over semantic and
// matching neighbors of W [w_j x_j || x_i] + residual.
template <typename T>
GraphMatchOutput<T> graph_match_forward(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                        const FusionParams<T>& params, bool relu_output = false);

// Dense adjacency-matrix evaluation of the same layer, in double precision.
// Intended as a test oracle for small graphs.
template <typename T>
GraphMatchOutput<double> dense_reference_graph_match(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                                     const FusionParams<T>& params);

// Rows are tokens, columns snippets: matching weight (or raw score) carried by
// the edge snippet -> token.
template <typename T>
std::vector<std::vector<double>> token_snippet_matrix(const MatchingGraph<T>& graph, const EdgeScalars<T>& scalars,
                                                      bool pre_softmax);

// Ablation fusions. `query` is the pooled query vector [c x 1] (or [c]).
template <typename T>
Tensor<T> hadamard_snippet_fusion(const Tensor<T>& video, const Tensor<T>& query);

// relu(proj [x_i || q]) with proj: [c x 2c].
template <typename T>
Tensor<T> concat_snippet_fusion(const Tensor<T>& video, const Tensor<T>& query, const Tensor<T>& proj);

}  // namespace vlg
