#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vlg/config.hpp"
#include "vlg/fusion.hpp"
#include "vlg/graphs.hpp"
#include "vlg/language_stream.hpp"
#include "vlg/localization.hpp"
#include "vlg/moments.hpp"
#include "vlg/params.hpp"
#include "vlg/video_stream.hpp"

namespace vlg {

template <typename T>
struct ModelOutput {
  CandidateSet candidates;
  Tensor<T> logits;  // [1 x m]
  std::vector<double> probabilities;
  Tensor<T> pooling_weights;  // [n_v x m]
  Tensor<T> query_weights;    // [1 x n_l], undefined when no query is pooled
  // Graph and edge weights of the last matching layer (graph_match fusion only).
  std::optional<MatchingGraph<T>> graph;
  std::optional<EdgeScalars<T>> scalars;
};

// Full grounding network: video stream, language stream, cross-modal fusion,
// masked moment pooling with a 2D positional embedding, and the moment scorer.
template <typename T>
class VlgNet {
 public:
  // Parameters are initialized from config.seed. Input widths default to the
  // config's feature widths when those are set.
  VlgNet(const ModelConfig& config, std::size_t video_width, std::size_t token_width);

  // video: [c_v x n_v], tokens: [c_l x n_l].
  ModelOutput<T> forward(const Tensor<T>& video, const Tensor<T>& tokens, const DependencyParse& parse,
                         double duration) const;

  Tensor<T> loss(const ModelOutput<T>& output, const Interval& ground_truth) const;

  // Ranked candidates after NMS, in seconds.
  Prediction predict(const ModelOutput<T>& output) const;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

 private:
  ModelConfig config_;
  std::size_t video_width_;
  std::size_t token_width_;
  SamplingConfig sampling_;
  ParameterSet<T> params_;
  std::optional<VideoStream<T>> video_;
  std::optional<LanguageStream<T>> language_;
  std::vector<FusionParams<T>> fusion_;
  Tensor<T> concat_proj_;
  std::optional<ScoreConv<T>> query_pool_;
  PoolingParams<T> pooling_;
  ScorerParams<T> scorer_;
};

}  // namespace vlg
