#include "vlg/localization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlg/error.hpp"
#include "vlg/ops.hpp"

namespace vlg {

double temporal_iou(const Interval& a, const Interval& b) {
  if (a.start > a.end || b.start > b.end) throw ValidationError("temporal_iou: interval start exceeds end");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  if (uni <= 0.0) return 0.0;
  return std::min(1.0, inter / uni);
}

void LossConfig::validate() const {
  if (!(low >= 0.0 && low < high && high <= 1.0)) {
    throw ConfigError("IoU thresholds must satisfy 0 <= θ1 < θ2 <= 1, got (" + std::to_string(low) + ", " +
                      std::to_string(high) + ")");
  }
}

double soft_label(double iou, const LossConfig& config) {
  if (iou >= config.high) return 1.0;
  if (iou <= config.low) return 0.0;
  return (iou - config.low) / (config.high - config.low);
}

template <typename T>
Tensor<T> soft_iou_labels(const CandidateSet& candidates, const Interval& ground_truth, const LossConfig& config) {
  config.validate();
  if (ground_truth.start < 0.0 || ground_truth.end > candidates.duration + 1e-9) {
    throw ValidationError("ground truth lies outside [0, duration]");
  }
  std::vector<T> labels;
  labels.reserve(candidates.size());
  for (const auto& c : candidates.candidates) {
    labels.push_back(static_cast<T>(soft_label(temporal_iou({c.t_start, c.t_end}, ground_truth), config)));
  }
  return Tensor<T>::from({1, candidates.size()}, std::move(labels));
}

template <typename T>
ScorerParams<T> ScorerParams<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t width,
                                        std::size_t hidden, Rng& rng) {
  ScorerParams p;
  p.w1 = params.add(prefix + ".w1", glorot_uniform<T>({hidden, width}, width, hidden, rng));
  p.b1 = params.add(prefix + ".b1", Tensor<T>::zeros({hidden, 1}));
  p.w2 = params.add(prefix + ".w2", glorot_uniform<T>({1, hidden}, hidden, 1, rng));
  p.b2 = params.add(prefix + ".b2", Tensor<T>::zeros({1, 1}));
  return p;
}

template <typename T>
MomentScores<T> score_moments(const Tensor<T>& moments, const ScorerParams<T>& params) {
  if (moments.rank() != 2 || moments.dim(0) != params.w1.dim(1)) {
    throw DimensionError("scorer expects [" + std::to_string(params.w1.dim(1)) + " x m] moments, got " +
                         shape_str(moments.shape()));
  }
  MomentScores<T> out;
  const Tensor<T> hidden = relu(add(matmul(params.w1, moments), params.b1));
  out.logits = add(matmul(params.w2, hidden), params.b2);
  out.probabilities.reserve(out.logits.numel());
  for (T z : out.logits.data()) {
    const double x = static_cast<double>(z);
    out.probabilities.push_back(x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)));
  }
  return out;
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
  return bce_with_logits(logits, targets);
}

Prediction nms(Prediction predictions, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("NMS threshold must lie in (0, 1], got " + std::to_string(threshold));
  }
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const ScoredMoment& a, const ScoredMoment& b) { return a.score > b.score; });
  Prediction kept;
  for (const auto& candidate : predictions) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (temporal_iou({candidate.start, candidate.end}, {k.start, k.end}) >= threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

Prediction rank_candidates(const CandidateSet& candidates, const std::vector<double>& scores) {
  if (scores.size() != candidates.size()) throw DimensionError("rank_candidates: one score per candidate required");
  Prediction ranked;
  ranked.reserve(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    ranked.push_back({candidates.candidates[k].t_start, candidates.candidates[k].t_end, scores[k]});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredMoment& a, const ScoredMoment& b) { return a.score > b.score; });
  return ranked;
}

double recall_at_k_iou(const std::vector<Prediction>& predictions, const std::vector<Interval>& ground_truth,
                       std::size_t k, double iou_threshold) {
  if (k == 0) throw ConfigError("recall@k needs k >= 1");
  if (predictions.size() != ground_truth.size()) {
    throw DimensionError("recall@k: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(ground_truth.size()) + " ground-truth moments");
  }
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const std::size_t top = std::min(k, predictions[s].size());
    for (std::size_t r = 0; r < top; ++r) {
      if (temporal_iou({predictions[s][r].start, predictions[s][r].end}, ground_truth[s]) >= iou_threshold) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

#define VLG_INSTANTIATE_LOCALIZATION(T)                                                              \
  template Tensor<T> soft_iou_labels<T>(const CandidateSet&, const Interval&, const LossConfig&);    \
  template struct ScorerParams<T>;                                                                   \
  template MomentScores<T> score_moments(const Tensor<T>&, const ScorerParams<T>&);                  \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);

VLG_INSTANTIATE_LOCALIZATION(float)
VLG_INSTANTIATE_LOCALIZATION(double)

}  // namespace vlg
