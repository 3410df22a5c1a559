#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

// Inclusive snippet span [start, end] and its extent in seconds.
struct MomentCandidate {
  std::size_t start = 0;
  std::size_t end = 0;
  double t_start = 0.0;
  double t_end = 0.0;

  std::size_t span() const { return end - start + 1; }
};

// Spans up to `dense_limit` keep every start; a longer span s uses the stride of
// the first schedule entry with max_span >= s and keeps starts divisible by it.
struct SamplingConfig {
  std::size_t dense_limit = 0;
  std::vector<std::pair<std::size_t, std::size_t>> schedule;  // (max_span, start_stride)

  // dense_limit = max(1, n_v / 4), then strides 2, 4, 8, ... per doubling of span.
  static SamplingConfig default_for(std::size_t n_v);
  void validate(std::size_t n_v) const;
};

struct CandidateSet {
  std::size_t snippets = 0;
  double duration = 0.0;
  std::vector<MomentCandidate> candidates;  // ordered by span, then start

  std::size_t size() const { return candidates.size(); }
  // [n_v x m]: 0 inside each candidate's span, kMaskValue outside.
  template <typename T>
  Tensor<T> mask() const {
    std::vector<T> values(snippets * candidates.size(), static_cast<T>(kMaskValue));
    for (std::size_t k = 0; k < candidates.size(); ++k)
      for (std::size_t i = candidates[k].start; i <= candidates[k].end; ++i) values[i * candidates.size() + k] = T(0);
    return Tensor<T>::from({snippets, candidates.size()}, std::move(values));
  }
};

CandidateSet enumerate_candidates(std::size_t n_v, double duration, const SamplingConfig& config);

// Recovers (start, end) from one mask column; throws if the zero run is not contiguous.
template <typename T>
std::pair<std::size_t, std::size_t> span_from_mask_column(const Tensor<T>& mask, std::size_t column);

enum class PoolingVariant { kLearnableSelf, kCross, kLearnableCross };

const char* pooling_variant_name(PoolingVariant variant);
PoolingVariant parse_pooling_variant(const std::string& name);

// Kernel-size-1 convolution from `width` channels to one score per column.
template <typename T>
struct ScoreConv {
  Tensor<T> kernel;  // [1 x width x 1]
  Tensor<T> bias;    // [1]

  static ScoreConv create(ParameterSet<T>& params, const std::string& prefix, std::size_t width, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;  // [1 x n]
};

template <typename T>
struct AttentionPoolResult {
  Tensor<T> pooled;   // [c x 1] for the query, [c x m] for moments
  Tensor<T> weights;  // [1 x n_l] for the query, [n_v x m] for moments
};

// Softmax over tokens of a kernel-1 convolution score, then the weighted sum.
template <typename T>
AttentionPoolResult<T> self_attention_pool_query(const Tensor<T>& language, const ScoreConv<T>& scorer);

template <typename T>
struct PoolingParams {
  PoolingVariant variant = PoolingVariant::kLearnableCross;
  ScoreConv<T> scorer;  // width c (learnable_self) or 2c (learnable_cross); unused for cross

  static PoolingParams create(ParameterSet<T>& params, const std::string& prefix, PoolingVariant variant,
                              std::size_t width, Rng& rng);
};

// Y = X_v softmax_over_snippets(w 1^T + M) with the unnormalized snippet scores
// w chosen by the variant.
template <typename T>
AttentionPoolResult<T> masked_attention_pool(const Tensor<T>& video, const std::optional<Tensor<T>>& query,
                                             const CandidateSet& candidates, const Tensor<T>& mask,
                                             const PoolingParams<T>& params);

// [c x m]: sinusoid of the start index in the first c/2 channels, of the end
// index in the last c/2.
template <typename T>
Tensor<T> positional_embedding_2d(const CandidateSet& candidates, std::size_t c);

}  // namespace vlg
