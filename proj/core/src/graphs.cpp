#include "vlg/graphs.hpp"

#include <algorithm>
#include <numeric>

#include "vlg/error.hpp"

namespace vlg {

const char* edge_type_name(EdgeType type) {
  switch (type) {
    case EdgeType::kOrdering:
      return "ordering";
    case EdgeType::kSemantic:
      return "semantic";
    case EdgeType::kSyntactic:
      return "syntactic";
    case EdgeType::kMatching:
      return "matching";
  }
  return "unknown";
}

std::size_t EdgeSet::edge_count() const {
  std::size_t n = 0;
  for (const auto& list : neighbors) n += list.size();
  return n;
}

bool EdgeSet::has_edge(std::size_t source, std::size_t target) const {
  if (target >= neighbors.size()) return false;
  const auto& list = neighbors[target];
  return std::find(list.begin(), list.end(), source) != list.end();
}

EdgeSet::Flat EdgeSet::flatten() const {
  Flat flat;
  flat.source.reserve(edge_count());
  flat.target.reserve(edge_count());
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    for (auto i : neighbors[j]) {
      flat.source.push_back(i);
      flat.target.push_back(j);
    }
  }
  return flat;
}

EdgeSet EdgeSet::none(EdgeType type, std::size_t node_count) {
  return EdgeSet{type, node_count, std::vector<std::vector<std::size_t>>(node_count)};
}

void DependencyParse::validate(std::size_t token_count) const {
  if (arcs.size() != token_count) {
    throw ValidationError("parse has " + std::to_string(arcs.size()) + " arcs for " + std::to_string(token_count) +
                          " tokens");
  }
  std::vector<bool> seen(token_count, false);
  for (const auto& arc : arcs) {
    if (arc.dependent >= token_count) {
      throw ValidationError("parse references dependent token " + std::to_string(arc.dependent + 1) + " of " +
                            std::to_string(token_count));
    }
    if (arc.head && *arc.head >= token_count) {
      throw ValidationError("parse references head token " + std::to_string(*arc.head + 1) + " of " +
                            std::to_string(token_count));
    }
    if (arc.head && *arc.head == arc.dependent) {
      throw ValidationError("parse has a self arc on token " + std::to_string(arc.dependent + 1));
    }
    if (seen[arc.dependent]) {
      throw ValidationError("token " + std::to_string(arc.dependent + 1) + " has more than one head");
    }
    seen[arc.dependent] = true;
  }
}

DependencyParse DependencyParse::chain(std::size_t token_count) {
  DependencyParse parse;
  for (std::size_t i = 0; i < token_count; ++i) {
    DependencyArc arc{i, std::nullopt, i == 0 ? "root" : "dep"};
    if (i > 0) arc.head = i - 1;
    parse.arcs.push_back(arc);
  }
  return parse;
}

EdgeSet build_ordering_edges(std::size_t n, bool bidirectional) {
  if (n == 0) throw DimensionError("ordering edges: graph has no nodes");
  EdgeSet edges = EdgeSet::none(EdgeType::kOrdering, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) edges.neighbors[i].push_back(i - 1);
    if (bidirectional && i + 1 < n) edges.neighbors[i].push_back(i + 1);
  }
  return edges;
}

template <typename T>
EdgeSet build_semantic_edges(const Tensor<T>& features, std::size_t k) {
  if (features.rank() != 2) throw DimensionError("semantic edges: features must be [c x n]");
  const std::size_t c = features.dim(0), n = features.dim(1);
  if (k == 0 || k >= n) {
    throw ConfigError("semantic edges: k = " + std::to_string(k) + " must lie in [1, n-1] for n = " +
                      std::to_string(n));
  }
  const auto x = features.data();
  EdgeSet edges = EdgeSet::none(EdgeType::kSemantic, n);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    ranked.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      double d = 0;
      for (std::size_t r = 0; r < c; ++r) {
        const double diff = static_cast<double>(x[r * n + i]) - static_cast<double>(x[r * n + j]);
        d += diff * diff;
      }
      ranked.emplace_back(d, i);
    }
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
    for (std::size_t r = 0; r < k; ++r) edges.neighbors[j].push_back(ranked[r].second);
  }
  return edges;
}

EdgeSet build_syntactic_edges(const DependencyParse& parse, std::size_t token_count, bool head_to_dependent_only) {
  parse.validate(token_count);
  EdgeSet edges = EdgeSet::none(EdgeType::kSyntactic, token_count);
  for (const auto& arc : parse.arcs) {
    if (!arc.head) continue;
    edges.neighbors[arc.dependent].push_back(*arc.head);
    if (!head_to_dependent_only) edges.neighbors[*arc.head].push_back(arc.dependent);
  }
  for (auto& list : edges.neighbors) std::sort(list.begin(), list.end());
  return edges;
}

EdgeSet build_matching_edges(std::size_t n_v, std::size_t n_l) {
  if (n_v == 0 || n_l == 0) throw DimensionError("matching edges need at least one node per modality");
  EdgeSet edges = EdgeSet::none(EdgeType::kMatching, n_v + n_l);
  for (std::size_t i = 0; i < n_v; ++i) {
    edges.neighbors[i].resize(n_l);
    std::iota(edges.neighbors[i].begin(), edges.neighbors[i].end(), n_v);
  }
  for (std::size_t j = 0; j < n_l; ++j) {
    edges.neighbors[n_v + j].resize(n_v);
    std::iota(edges.neighbors[n_v + j].begin(), edges.neighbors[n_v + j].end(), std::size_t{0});
  }
  return edges;
}

EdgeSet disjoint_union(const EdgeSet& first, const EdgeSet& second) {
  if (first.type != second.type) throw ConfigError("disjoint_union: edge types differ");
  EdgeSet out = EdgeSet::none(first.type, first.node_count + second.node_count);
  for (std::size_t j = 0; j < first.node_count; ++j) out.neighbors[j] = first.neighbors[j];
  for (std::size_t j = 0; j < second.node_count; ++j) {
    for (auto i : second.neighbors[j]) out.neighbors[first.node_count + j].push_back(first.node_count + i);
  }
  return out;
}

template EdgeSet build_semantic_edges(const Tensor<float>&, std::size_t);
template EdgeSet build_semantic_edges(const Tensor<double>&, std::size_t);

}  // namespace vlg
