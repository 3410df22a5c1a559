#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlg/moments.hpp"
#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// |a ∩ b| / |a ∪ b|, 0 when the union is empty. Throws on start > end.
double temporal_iou(const Interval& a, const Interval& b);

struct LossConfig {
  double low = 0.5;   // θ1
  double high = 0.7;  // θ2

  void validate() const;
};

// t = clamp((iou - θ1) / (θ2 - θ1), 0, 1).
double soft_label(double iou, const LossConfig& config);

template <typename T>
Tensor<T> soft_iou_labels(const CandidateSet& candidates, const Interval& ground_truth, const LossConfig& config);

// Two-layer MLP c -> hidden -> 1 with ReLU in between.
template <typename T>
struct ScorerParams {
  Tensor<T> w1;  // [hidden x c]
  Tensor<T> b1;  // [hidden x 1]
  Tensor<T> w2;  // [1 x hidden]
  Tensor<T> b2;  // [1 x 1]

  static ScorerParams create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                             std::size_t hidden, Rng& rng);
};

template <typename T>
struct MomentScores {
  Tensor<T> logits;         // [1 x m]
  std::vector<double> probabilities;
};

template <typename T>
MomentScores<T> score_moments(const Tensor<T>& moments, const ScorerParams<T>& params);

// Mean BCE of sigmoid(logits) against soft targets, in logit space.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets);

struct ScoredMoment {
  double start = 0.0;
  double end = 0.0;
  double score = 0.0;
};

using Prediction = std::vector<ScoredMoment>;

// Greedy suppression: keep the best remaining moment, drop those with IoU >=
// threshold against any kept one. Input need not be sorted.
Prediction nms(Prediction predictions, double threshold);

// Candidates with scores, sorted by descending score (stable on ties).
Prediction rank_candidates(const CandidateSet& candidates, const std::vector<double>& scores);

// Percentage of samples whose top-k predictions contain one with IoU >= θ.
double recall_at_k_iou(const std::vector<Prediction>& predictions, const std::vector<Interval>& ground_truth,
                       std::size_t k, double iou_threshold);

}  // namespace vlg
