#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vlg/tensor.hpp"

namespace vlg {

enum class EdgeType { kOrdering, kSemantic, kSyntactic, kMatching };

const char* edge_type_name(EdgeType type);

// Typed adjacency stored as incoming neighbor lists: neighbors[j] holds the
// source nodes whose messages node j aggregates.
struct EdgeSet {
  EdgeType type = EdgeType::kOrdering;
  std::size_t node_count = 0;
  std::vector<std::vector<std::size_t>> neighbors;

  // Edges grouped by target in node order, sources in list order.
  struct Flat {
    std::vector<std::size_t> source;
    std::vector<std::size_t> target;
  };

  std::size_t edge_count() const;
  bool empty() const { return edge_count() == 0; }
  bool has_edge(std::size_t source, std::size_t target) const;
  Flat flatten() const;

  static EdgeSet none(EdgeType type, std::size_t node_count);
};

struct DependencyArc {
  std::size_t dependent = 0;          // 0-based token index
  std::optional<std::size_t> head;    // 0-based token index, nullopt for ROOT
  std::string relation;
};

struct DependencyParse {
  std::vector<DependencyArc> arcs;

  // Exactly one arc per token, no self arcs, all indices in range.
  void validate(std::size_t token_count) const;
  // Token i headed by token i-1, token 0 headed by ROOT.
  static DependencyParse chain(std::size_t token_count);
};

// Node i receives from i-1 (and i+1 when bidirectional).
EdgeSet build_ordering_edges(std::size_t n, bool bidirectional = true);

// Node j receives from its k nearest other columns of `features` [c x n] by
// squared Euclidean distance; ties go to the lower index.
template <typename T>
EdgeSet build_semantic_edges(const Tensor<T>& features, std::size_t k);

// Arc head -> dependent makes the dependent receive from the head; unless
// `head_to_dependent_only`, the head also receives from the dependent.
EdgeSet build_syntactic_edges(const DependencyParse& parse, std::size_t token_count,
                              bool head_to_dependent_only = false);

// Dense bipartite graph over n_v snippet nodes followed by n_l token nodes.
EdgeSet build_matching_edges(std::size_t n_v, std::size_t n_l);

// Places `first` on nodes [0, first.node_count) and `second` after it.
EdgeSet disjoint_union(const EdgeSet& first, const EdgeSet& second);

}  // namespace vlg
