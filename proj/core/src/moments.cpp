#include "vlg/moments.hpp"

#include <algorithm>

#include "vlg/error.hpp"
#include "vlg/ops.hpp"
#include "vlg/video_stream.hpp"

namespace vlg {

SamplingConfig SamplingConfig::default_for(std::size_t n_v) {
  SamplingConfig config;
  config.dense_limit = std::max<std::size_t>(1, n_v / 4);
  std::size_t max_span = config.dense_limit;
  std::size_t stride = 1;
  while (max_span < n_v) {
    max_span *= 2;
    stride *= 2;
    config.schedule.emplace_back(std::min(max_span, n_v), stride);
  }
  return config;
}

void SamplingConfig::validate(std::size_t n_v) const {
  if (dense_limit == 0) throw ConfigError("sampling: dense limit must be at least 1");
  std::size_t previous = dense_limit;
  for (const auto& [max_span, stride] : schedule) {
    if (stride == 0) throw ConfigError("sampling: strides must be at least 1");
    if (max_span <= previous) throw ConfigError("sampling: schedule spans must be increasing");
    previous = max_span;
  }
  if (dense_limit < n_v && (schedule.empty() || schedule.back().first < n_v)) {
    throw ConfigError("sampling: schedule must cover spans up to " + std::to_string(n_v) + " snippets");
  }
}

CandidateSet enumerate_candidates(std::size_t n_v, double duration, const SamplingConfig& config) {
  if (n_v == 0) throw ConfigError("candidates: video has no snippets");
  if (!(duration > 0)) throw ConfigError("candidates: duration must be positive");
  config.validate(n_v);
  CandidateSet set;
  set.snippets = n_v;
  set.duration = duration;
  const double step = duration / static_cast<double>(n_v);
  std::size_t entry = 0;
  for (std::size_t span = 1; span <= n_v; ++span) {
    std::size_t stride = 1;
    if (span > config.dense_limit) {
      while (config.schedule[entry].first < span) ++entry;
      stride = config.schedule[entry].second;
    }
    for (std::size_t start = 0; start + span <= n_v; start += stride) {
      const std::size_t end = start + span - 1;
      set.candidates.push_back({start, end, static_cast<double>(start) * step, static_cast<double>(end + 1) * step});
    }
  }
  return set;
}

template <typename T>
std::pair<std::size_t, std::size_t> span_from_mask_column(const Tensor<T>& mask, std::size_t column) {
  const std::size_t n_v = mask.dim(0), m = mask.dim(1);
  if (column >= m) throw DimensionError("mask column out of range");
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < n_v; ++i) {
    if (mask[i * m + column] == T(0)) {
      if (last && *last + 1 != i) throw ValidationError("mask column is not a contiguous span");
      if (!first) first = i;
      last = i;
    }
  }
  if (!first) throw ValidationError("mask column selects no snippets");
  return {*first, *last};
}

const char* pooling_variant_name(PoolingVariant variant) {
  switch (variant) {
    case PoolingVariant::kLearnableSelf:
      return "learnable_self";
    case PoolingVariant::kCross:
      return "cross";
    case PoolingVariant::kLearnableCross:
      return "learnable_cross";
  }
  return "unknown";
}

PoolingVariant parse_pooling_variant(const std::string& name) {
  if (name == "learnable_self") return PoolingVariant::kLearnableSelf;
  if (name == "cross") return PoolingVariant::kCross;
  if (name == "learnable_cross") return PoolingVariant::kLearnableCross;
  throw ConfigError("unknown pooling variant '" + name + "'");
}

template <typename T>
ScoreConv<T> ScoreConv<T>::create(ParameterSet<T>& params, const std::string& prefix, std::size_t width, Rng& rng) {
  ScoreConv conv;
  conv.kernel = params.add(prefix + ".kernel", glorot_uniform<T>({1, width, 1}, width, 1, rng));
  conv.bias = params.add(prefix + ".bias", Tensor<T>::zeros({1}));
  return conv;
}

template <typename T>
Tensor<T> ScoreConv<T>::forward(const Tensor<T>& x) const {
  return conv1d(x, kernel, bias);
}

template <typename T>
AttentionPoolResult<T> self_attention_pool_query(const Tensor<T>& language, const ScoreConv<T>& scorer) {
  if (language.rank() != 2) throw DimensionError("query pooling expects [c x n_l], got " + shape_str(language.shape()));
  AttentionPoolResult<T> result;
  result.weights = softmax(scorer.forward(language), 1);                // [1 x n_l]
  result.pooled = matmul(language, transpose(result.weights));          // [c x 1]
  return result;
}

template <typename T>
PoolingParams<T> PoolingParams<T>::create(ParameterSet<T>& params, const std::string& prefix, PoolingVariant variant,
                                          std::size_t width, Rng& rng) {
  PoolingParams p;
  p.variant = variant;
  if (variant == PoolingVariant::kLearnableSelf) p.scorer = ScoreConv<T>::create(params, prefix, width, rng);
  if (variant == PoolingVariant::kLearnableCross) p.scorer = ScoreConv<T>::create(params, prefix, 2 * width, rng);
  return p;
}

template <typename T>
AttentionPoolResult<T> masked_attention_pool(const Tensor<T>& video, const std::optional<Tensor<T>>& query,
                                             const CandidateSet& candidates, const Tensor<T>& mask,
                                             const PoolingParams<T>& params) {
  if (video.rank() != 2) throw DimensionError("moment pooling expects [c x n_v], got " + shape_str(video.shape()));
  const std::size_t c = video.dim(0), n_v = video.dim(1);
  if (candidates.snippets != n_v || mask.rank() != 2 || mask.dim(0) != n_v || mask.dim(1) != candidates.size()) {
    throw DimensionError("moment pooling: mask " + shape_str(mask.shape()) + " does not match " +
                         std::to_string(n_v) + " snippets and " + std::to_string(candidates.size()) + " candidates");
  }
  const bool needs_query = params.variant != PoolingVariant::kLearnableSelf;
  if (needs_query && !query) {
    throw ConfigError(std::string("pooling variant ") + pooling_variant_name(params.variant) +
                      " needs a pooled query vector");
  }
  Tensor<T> q;
  if (needs_query) {
    if (query->numel() != c) throw DimensionError("pooled query width does not match snippet width");
    q = query->rank() == 2 && query->dim(1) == 1 ? *query : reshape(*query, {c, 1});
  }

  Tensor<T> scores;  // [1 x n_v]
  switch (params.variant) {
    case PoolingVariant::kLearnableSelf:
      scores = params.scorer.forward(video);
      break;
    case PoolingVariant::kCross:
      scores = sum_axis(mul(video, q), 0);
      break;
    case PoolingVariant::kLearnableCross: {
      const Tensor<T> repeated = matmul(q, Tensor<T>::full({1, n_v}, T(1)));
      scores = params.scorer.forward(concat<T>({video, repeated}, 0));
      break;
    }
  }
  AttentionPoolResult<T> result;
  result.weights = softmax(add(transpose(scores), mask), 0);  // [n_v x m]
  result.pooled = matmul(video, result.weights);              // [c x m]
  return result;
}

template <typename T>
Tensor<T> positional_embedding_2d(const CandidateSet& candidates, std::size_t c) {
  if (c == 0 || c % 2 != 0) throw ConfigError("2D positional embedding width must be even, got " + std::to_string(c));
  const std::size_t half = c / 2, m = candidates.size();
  std::vector<T> values(c * m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t ch = 0; ch < half; ++ch) {
      values[ch * m + k] = static_cast<T>(sinusoid(candidates.candidates[k].start, ch, half));
      values[(half + ch) * m + k] = static_cast<T>(sinusoid(candidates.candidates[k].end, ch, half));
    }
  }
  return Tensor<T>::from({c, m}, std::move(values));
}

#define VLG_INSTANTIATE_MOMENTS(T)                                                                           \
  template std::pair<std::size_t, std::size_t> span_from_mask_column(const Tensor<T>&, std::size_t);          \
  template struct ScoreConv<T>;                                                                              \
  template AttentionPoolResult<T> self_attention_pool_query(const Tensor<T>&, const ScoreConv<T>&);         \
  template struct PoolingParams<T>;                                                                          \
  template AttentionPoolResult<T> masked_attention_pool(const Tensor<T>&, const std::optional<Tensor<T>>&,  \
                                                        const CandidateSet&, const Tensor<T>&,              \
                                                        const PoolingParams<T>&);                            \
  template Tensor<T> positional_embedding_2d<T>(const CandidateSet&, std::size_t);

VLG_INSTANTIATE_MOMENTS(float)
VLG_INSTANTIATE_MOMENTS(double)

}  // namespace vlg
