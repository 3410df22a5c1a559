#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vlg/error.hpp"
#include "vlg/gradcheck.hpp"
#include "vlg/localization.hpp"
#include "vlg/ops.hpp"

using namespace vlg;
using vlg::testing::random_tensor;

TEST(TemporalIou, Examples) {
  EXPECT_DOUBLE_EQ(temporal_iou({0, 10}, {5, 10}), 0.5);
  EXPECT_DOUBLE_EQ(temporal_iou({3, 7}, {3, 7}), 1.0);
  EXPECT_DOUBLE_EQ(temporal_iou({0, 1}, {2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(temporal_iou({2, 2}, {2, 2}), 0.0);
  EXPECT_THROW(temporal_iou({3, 1}, {0, 1}), ValidationError);
}

TEST(TemporalIou, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = oracle::grid_interval(g), b = oracle::grid_interval(g);
    const double v = temporal_iou(a, b);
    EXPECT_EQ(v, oracle::iou(a, b));
    EXPECT_EQ(v, temporal_iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SoftLabels, Examples) {
  LossConfig cfg{0.5, 0.7};
  EXPECT_NEAR(soft_label(0.6, cfg), 0.5, 1e-12);
  EXPECT_EQ(soft_label(0.8, cfg), 1.0);
  EXPECT_EQ(soft_label(0.3, cfg), 0.0);
}

TEST(SoftLabels, InvalidThresholds) {
  EXPECT_THROW((LossConfig{0.7, 0.7}).validate(), ConfigError);
  EXPECT_THROW((LossConfig{0.8, 0.7}).validate(), ConfigError);
  EXPECT_NO_THROW((LossConfig{0.7, 0.71}).validate());
  auto cands = enumerate_candidates(4, 4.0, SamplingConfig{4, {}});
  EXPECT_THROW(soft_iou_labels<double>(cands, {0, 2}, LossConfig{0.6, 0.5}), ConfigError);
  EXPECT_THROW(soft_iou_labels<double>(cands, {0, 5}, LossConfig{}), ValidationError);
}

TEST(SoftLabels, PiecewiseOnDenseGridAndLipschitz) {
  for (auto [lo, hi] : {std::pair{0.5, 0.7}, {0.7, 0.71}, {0.69, 1.0}, {0.0, 1.0}}) {
    LossConfig cfg{lo, hi};
    double previous = soft_label(0.0, cfg);
    for (int i = 0; i <= 10000; ++i) {
      const double iou = i / 10000.0;
      const double t = soft_label(iou, cfg);
      EXPECT_EQ(t, oracle::soft_label(iou, lo, hi));
      if (i > 0) EXPECT_LE(std::abs(t - previous), 1e-4 / (hi - lo) + 1e-12);
      previous = t;
    }
  }
}

TEST(SoftLabels, CandidateLabelsFollowIou) {
  auto cands = enumerate_candidates(16, 16.0, SamplingConfig::default_for(16));
  Interval gt{3, 9};
  LossConfig cfg{0.5, 0.7};
  auto labels = soft_iou_labels<double>(cands, gt, cfg);
  ASSERT_EQ(labels.numel(), cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const auto& c = cands.candidates[k];
    EXPECT_EQ(labels[k], oracle::soft_label(oracle::iou({c.t_start, c.t_end}, gt), 0.5, 0.7));
  }
}

namespace {

ScorerParams<double> scorer(ParameterSet<double>& params, std::size_t c, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  return ScorerParams<double>::create(params, "s", c, hidden, rng);
}

}  // namespace

TEST(Scorer, ZeroWeightsGiveHalf) {
  ParameterSet<double> params;
  auto s = scorer(params, 4, 4, 1);
  for (const auto& e : params.entries()) {
    Tensor<double> t = e.tensor;
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  std::mt19937_64 g(2);
  for (double p : score_moments(random_tensor({4, 7}, g), s).probabilities) EXPECT_EQ(p, 0.5);
}

TEST(Scorer, FinalBiasIsMonotone) {
  ParameterSet<double> params;
  auto s = scorer(params, 4, 6, 3);
  std::mt19937_64 g(4);
  auto y = random_tensor({4, 9}, g);
  auto before = score_moments(y, s).probabilities;
  s.b2.mutable_data()[0] += 0.25;
  auto after = score_moments(y, s).probabilities;
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_GT(after[k], before[k]);
}

TEST(Scorer, GradientMatchesFiniteDifferences) {
  ParameterSet<double> params;
  auto s = scorer(params, 4, 5, 5);
  std::mt19937_64 g(6);
  auto y = random_tensor({4, 6}, g);
  auto report = grad_check([&] { return sum(mul(score_moments(y, s).logits, score_moments(y, s).logits)); },
                           {y, s.w1, s.b1, s.w2, s.b2});
  EXPECT_TRUE(report.passed) << report.message;
  EXPECT_THROW(score_moments(random_tensor({3, 6}, g), s), DimensionError);
}

TEST(Bce, SymmetricPointIsLn2) {
  auto loss = bce_loss(Tensor<double>::zeros({1, 3}), Tensor<double>::full({1, 3}, 0.5));
  EXPECT_NEAR(loss.item(), std::log(2.0), 1e-12);
}

TEST(Bce, SaturatedLogitsStayFinite) {
  auto loss = bce_loss(Tensor<double>::full({1, 2}, 1e3), Tensor<double>::full({1, 2}, 1.0));
  EXPECT_TRUE(std::isfinite(loss.item()));
  EXPECT_LT(loss.item(), 1e-12);
  auto wrong = bce_loss(Tensor<double>::full({1, 1}, -1e3), Tensor<double>::full({1, 1}, 1.0));
  EXPECT_NEAR(wrong.item(), 1e3, 1e-9);
}

TEST(Bce, MatchesDirectFormula) {
  std::mt19937_64 g(7);
  auto z = random_tensor({1, 8}, g, -4, 4);
  auto t = random_tensor({1, 8}, g, 0, 1);
  double expected = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    const double p = 1.0 / (1.0 + std::exp(-z[k]));
    expected -= t[k] * std::log(p) + (1 - t[k]) * std::log(1 - p);
  }
  EXPECT_NEAR(bce_loss(z, t).item(), expected / 8, 1e-12);
}

TEST(Bce, GradientAndStationaryPoint) {
  std::mt19937_64 g(8);
  auto z = random_tensor({1, 6}, g, -3, 3);
  auto t = random_tensor({1, 6}, g, 0, 1);
  auto report = grad_check([&] { return bce_loss(z, t); }, {z});
  EXPECT_TRUE(report.passed) << report.message;

  auto sig = sigmoid(z).detach();
  z.clear_grad();
  backward(bce_loss(z, sig));
  for (auto v : z.grad()) EXPECT_LT(std::abs(v), 1e-6);
}

TEST(Bce, TargetsOutsideUnitIntervalRejected) {
  EXPECT_THROW(bce_loss(Tensor<double>::zeros({1, 2}), Tensor<double>::vector({0.5, 1.5})), ValidationError);
}

TEST(Nms, Example) {
  Prediction in{{0, 10, 0.9}, {1, 10, 0.8}, {20, 30, 0.7}};
  auto out = nms(in, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].start, 0);
  EXPECT_EQ(out[1].start, 20);
}

TEST(Nms, SingleAndDisjoint) {
  EXPECT_EQ(nms({{1, 2, 0.3}}, 0.5).size(), 1u);
  Prediction disjoint{{0, 1, 0.2}, {2, 3, 0.9}, {4, 5, 0.5}};
  auto out = nms(disjoint, 0.1);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[2].score, 0.2);
}

TEST(Nms, EqualityIsSuppressed) {
  // IoU exactly 0.5 against the kept item.
  auto out = nms({{0, 10, 0.9}, {5, 10, 0.8}}, 0.5);
  EXPECT_EQ(out.size(), 1u);
}

TEST(Nms, ThresholdRange) {
  EXPECT_THROW(nms({}, 0.0), ConfigError);
  EXPECT_THROW(nms({}, 1.5), ConfigError);
  EXPECT_NO_THROW(nms({}, 1.0));
}

TEST(Nms, MatchesOracleAndKeepsInvariants) {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = oracle::random_prediction(g, 1 + g() % 15);
    std::shuffle(in.begin(), in.end(), g);
    const double thr = 0.05 + 0.05 * double(g() % 19);
    auto out = nms(in, thr);
    auto expected = oracle::nms(in, thr);
    ASSERT_EQ(out.size(), expected.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].start, expected[i].start);
      EXPECT_EQ(out[i].end, expected[i].end);
      EXPECT_EQ(out[i].score, expected[i].score);
      if (i > 0) EXPECT_GE(out[i - 1].score, out[i].score);
      for (std::size_t j = 0; j < i; ++j) EXPECT_LT(temporal_iou({out[i].start, out[i].end}, {out[j].start, out[j].end}), thr);
    }
  }
}

TEST(Ranking, DescendingStableOnTies) {
  auto cands = enumerate_candidates(3, 3.0, SamplingConfig{3, {}});
  auto ranked = rank_candidates(cands, {0.2, 0.5, 0.5, 0.1, 0.9, 0.0});
  EXPECT_EQ(ranked[0].score, 0.9);
  EXPECT_EQ(ranked[1].start, 1.0);  // first of the tied pair
  EXPECT_EQ(ranked[2].start, 2.0);
  EXPECT_THROW(rank_candidates(cands, {0.1}), DimensionError);
}

TEST(Recall, Examples) {
  Interval gt{0, 1};
  Prediction p{{0, 0.55, 0.9}};
  EXPECT_NEAR(temporal_iou({p[0].start, p[0].end}, gt), 0.55, 1e-12);
  EXPECT_EQ(recall_at_k_iou({p}, {gt}, 1, 0.5), 100.0);
  EXPECT_EQ(recall_at_k_iou({p}, {gt}, 1, 0.7), 0.0);
  EXPECT_THROW(recall_at_k_iou({p}, {gt}, 0, 0.5), ConfigError);
  EXPECT_THROW(recall_at_k_iou({p}, {}, 1, 0.5), DimensionError);
}

TEST(Recall, MatchesOracleAndIsMonotone) {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Prediction> preds;
    std::vector<Interval> gts;
    for (int s = 0; s < 50; ++s) {
      preds.push_back(oracle::random_prediction(g, g() % 8));
      gts.push_back(oracle::grid_interval(g));
    }
    for (std::size_t k : {1u, 2u, 5u}) {
      for (double theta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        EXPECT_EQ(recall_at_k_iou(preds, gts, k, theta), oracle::recall(preds, gts, k, theta));
      }
    }
    for (int t = 1; t <= 9; ++t) {
      const double theta = t / 10.0;
      EXPECT_GE(recall_at_k_iou(preds, gts, 5, theta), recall_at_k_iou(preds, gts, 1, theta));
      if (t > 1) EXPECT_LE(recall_at_k_iou(preds, gts, 1, theta), recall_at_k_iou(preds, gts, 1, theta - 0.1));
    }
  }
}
