#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "test_support.hpp"
#include "vlg/error.hpp"
#include "vlg/graphs.hpp"

using namespace vlg;
using vlg::testing::random_tensor;

namespace {

using Lists = std::vector<std::vector<std::size_t>>;

// Independent k-NN: full sort of (distance, index) pairs per node.
Lists brute_knn(const Tensor<double>& x, std::size_t k) {
  const std::size_t c = x.dim(0), n = x.dim(1);
  Lists out(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      double d = 0;
      for (std::size_t r = 0; r < c; ++r) d += (x.at(r, i) - x.at(r, j)) * (x.at(r, i) - x.at(r, j));
      all.push_back({d, i});
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) out[j].push_back(all[r].second);
  }
  return out;
}

bool relation_symmetric(const EdgeSet& e) {
  for (std::size_t j = 0; j < e.node_count; ++j)
    for (auto i : e.neighbors[j])
      if (!e.has_edge(j, i)) return false;
  return true;
}

}  // namespace

TEST(OrderingEdges, SingleNodeHasNoEdges) { EXPECT_EQ(build_ordering_edges(1).edge_count(), 0u); }

TEST(OrderingEdges, ChainOfFour) {
  auto e = build_ordering_edges(4);
  EXPECT_EQ(e.neighbors, (Lists{{1}, {0, 2}, {1, 3}, {2}}));
  EXPECT_TRUE(relation_symmetric(e));
}

TEST(OrderingEdges, CountIsTwiceNMinusOne) {
  EXPECT_EQ(build_ordering_edges(3).edge_count(), 4u);
  for (std::size_t n = 1; n < 20; ++n) EXPECT_EQ(build_ordering_edges(n).edge_count(), 2 * (n - 1));
}

TEST(OrderingEdges, ForwardOnlyOption) {
  auto e = build_ordering_edges(3, false);
  EXPECT_EQ(e.neighbors, (Lists{{}, {0}, {1}}));
}

TEST(OrderingEdges, EmptyGraphThrows) { EXPECT_THROW(build_ordering_edges(0), DimensionError); }

TEST(SemanticEdges, TieGoesToLowerIndex) {
  auto x = Tensor<double>::matrix({{1, 1, 0}, {0, 0, 1}});
  auto e = build_semantic_edges(x, 1);
  EXPECT_EQ(e.neighbors, (Lists{{1}, {0}, {0}}));
}

TEST(SemanticEdges, IdenticalColumnsPickLowestOtherIndices) {
  auto x = Tensor<double>::full({3, 4}, 0.25);
  auto e = build_semantic_edges(x, 2);
  EXPECT_EQ(e.neighbors, (Lists{{1, 2}, {0, 2}, {0, 1}, {0, 1}}));
}

TEST(SemanticEdges, FullKConnectsEverythingButSelf) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({3, 6}, rng);
  auto e = build_semantic_edges(x, 5);
  for (std::size_t j = 0; j < 6; ++j) {
    std::set<std::size_t> got(e.neighbors[j].begin(), e.neighbors[j].end());
    EXPECT_EQ(got.size(), 5u);
    EXPECT_FALSE(got.count(j));
  }
}

TEST(SemanticEdges, KOutOfRangeIsConfigError) {
  auto x = Tensor<double>::zeros({2, 4});
  EXPECT_THROW(build_semantic_edges(x, 4), ConfigError);
  EXPECT_THROW(build_semantic_edges(x, 0), ConfigError);
}

TEST(SemanticEdges, MatchesBruteForceAndIsPure) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 31, k = 1 + rng() % (n - 1);
    auto x = random_tensor({1 + rng() % 5, n}, rng);
    auto e = build_semantic_edges(x, k);
    EXPECT_EQ(e.neighbors, brute_knn(x, k));
    EXPECT_EQ(build_semantic_edges(x, k).neighbors, e.neighbors);
    for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(e.neighbors[j].size(), k);
  }
}

TEST(SemanticEdges, PerturbationOnlyMovesListsThatSeeTheColumn) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng() % 29, k = 1 + rng() % 3;
    auto x = random_tensor({3, n}, rng);
    const auto before = build_semantic_edges(x, k).neighbors;
    const std::size_t p = rng() % n;
    auto data = x.mutable_data();
    for (std::size_t r = 0; r < 3; ++r) data[r * n + p] += 0.5 * ((rng() % 2) ? 1.0 : -1.0);
    const auto after = build_semantic_edges(x, k).neighbors;
    EXPECT_EQ(after, brute_knn(x, k));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == p || before[j] == after[j]) continue;
      const bool saw = std::count(before[j].begin(), before[j].end(), p) ||
                       std::count(after[j].begin(), after[j].end(), p);
      EXPECT_TRUE(saw) << "node " << j << " changed without involving column " << p;
    }
  }
}

TEST(SyntacticEdges, SingleArcIsBidirectional) {
  DependencyParse parse{{{0, std::nullopt, "root"}, {1, 0, "obj"}}};
  auto e = build_syntactic_edges(parse, 2);
  EXPECT_EQ(e.neighbors, (Lists{{1}, {0}}));
}

TEST(SyntacticEdges, AllRootGivesNoEdges) {
  DependencyParse parse{{{0, std::nullopt, "root"}, {1, std::nullopt, "root"}, {2, std::nullopt, "root"}}};
  EXPECT_TRUE(build_syntactic_edges(parse, 3).empty());
}

TEST(SyntacticEdges, ChainOfFourHasSixEntries) {
  auto e = build_syntactic_edges(DependencyParse::chain(4), 4);
  EXPECT_EQ(e.edge_count(), 6u);
  EXPECT_TRUE(relation_symmetric(e));
}

TEST(SyntacticEdges, HeadToDependentOnly) {
  auto e = build_syntactic_edges(DependencyParse::chain(3), 3, true);
  EXPECT_EQ(e.neighbors, (Lists{{}, {0}, {1}}));
}

TEST(SyntacticEdges, InvalidParsesAreRejected) {
  DependencyParse out_of_range{{{0, std::nullopt, "root"}, {1, 98, "x"}}};
  EXPECT_THROW(build_syntactic_edges(out_of_range, 2), ValidationError);
  DependencyParse self_arc{{{0, 0, "x"}}};
  EXPECT_THROW(build_syntactic_edges(self_arc, 1), ValidationError);
  DependencyParse twice{{{0, std::nullopt, "root"}, {0, std::nullopt, "root"}}};
  EXPECT_THROW(build_syntactic_edges(twice, 2), ValidationError);
  EXPECT_THROW(build_syntactic_edges(DependencyParse::chain(3), 4), ValidationError);
}

TEST(MatchingEdges, Counts) {
  EXPECT_EQ(build_matching_edges(2, 3).edge_count(), 12u);
  EXPECT_EQ(build_matching_edges(1, 1).edge_count(), 2u);
}

TEST(MatchingEdges, BipartiteAndSymmetric) {
  auto e = build_matching_edges(4, 4);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) EXPECT_EQ(e.has_edge(a, b), (a < 4) != (b < 4)) << a << "," << b;
  EXPECT_TRUE(relation_symmetric(e));
}

TEST(EdgeSet, FlattenGroupsByTarget) {
  auto flat = build_ordering_edges(3).flatten();
  EXPECT_EQ(flat.source, (std::vector<std::size_t>{1, 0, 2, 1}));
  EXPECT_EQ(flat.target, (std::vector<std::size_t>{0, 1, 1, 2}));
}

TEST(EdgeSet, DisjointUnionOffsetsSecondPart) {
  auto u = disjoint_union(build_ordering_edges(2), build_ordering_edges(2));
  EXPECT_EQ(u.neighbors, (Lists{{1}, {0}, {3}, {2}}));
  EXPECT_THROW(disjoint_union(build_ordering_edges(2), build_matching_edges(1, 1)), ConfigError);
}
