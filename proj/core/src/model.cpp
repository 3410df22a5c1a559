#include "vlg/model.hpp"

#include "vlg/error.hpp"
#include "vlg/ops.hpp"

namespace vlg {

namespace {

bool needs_query(const ModelConfig& config) {
  return config.fusion != FusionMode::kGraphMatch || config.pooling != PoolingVariant::kLearnableSelf;
}

}  // namespace

template <typename T>
VlgNet<T>::VlgNet(const ModelConfig& config, std::size_t video_width, std::size_t token_width)
    : config_(config), video_width_(video_width), token_width_(token_width) {
  config_.validate();
  if (video_width_ == 0 || token_width_ == 0) throw ConfigError("model: feature widths must be positive");
  if (config_.video_feature_width && config_.video_feature_width != video_width_) {
    throw ConfigError("model: config expects video features of width " + std::to_string(config_.video_feature_width) +
                      ", data has " + std::to_string(video_width_));
  }
  if (config_.token_feature_width && config_.token_feature_width != token_width_) {
    throw ConfigError("model: config expects token features of width " + std::to_string(config_.token_feature_width) +
                      ", data has " + std::to_string(token_width_));
  }
  config_.video_feature_width = video_width_;
  config_.token_feature_width = token_width_;
  sampling_ = config_.effective_sampling();

  const std::size_t c = config_.hidden_width;
  Rng rng(config_.seed);

  VideoStreamConfig vcfg;
  vcfg.input_width = video_width_;
  vcfg.hidden_width = c;
  vcfg.blocks = config_.video_blocks;
  vcfg.knn_k = config_.knn_k;
  vcfg.cardinality = config_.cardinality;
  vcfg.bottleneck = config_.bottleneck;
  vcfg.bidirectional_ordering = config_.ordering_bidirectional;
  vcfg.positional_encoding = config_.input_positional_encoding;
  video_.emplace(params_, vcfg, rng);

  LanguageStreamConfig lcfg;
  lcfg.input_width = token_width_;
  lcfg.hidden_width = c;
  lcfg.lstm_layers = config_.lstm_layers;
  lcfg.syntac_layers = config_.syntac_layers;
  lcfg.attention_width = config_.attention_width;
  lcfg.bidirectional = config_.lstm_bidirectional;
  lcfg.head_to_dependent_only = config_.syntactic_head_to_dependent_only;
  language_.emplace(params_, lcfg, rng);

  switch (config_.fusion) {
    case FusionMode::kGraphMatch:
      for (std::size_t l = 0; l < config_.matching_layers; ++l) {
        fusion_.push_back(FusionParams<T>::create(params_, "fusion" + std::to_string(l), c, config_.edges, rng));
      }
      break;
    case FusionMode::kConcat:
      concat_proj_ = params_.add("concat.proj", glorot_uniform<T>({c, 2 * c}, 2 * c, c, rng));
      break;
    case FusionMode::kHadamard:
      break;
  }
  if (needs_query(config_)) query_pool_ = ScoreConv<T>::create(params_, "query_pool", c, rng);
  pooling_ = PoolingParams<T>::create(params_, "pool", config_.pooling, c, rng);
  const std::size_t hidden = config_.scorer_hidden ? config_.scorer_hidden : c;
  scorer_ = ScorerParams<T>::create(params_, "scorer", c, hidden, rng);
}

template <typename T>
ModelOutput<T> VlgNet<T>::forward(const Tensor<T>& video, const Tensor<T>& tokens, const DependencyParse& parse,
                                  double duration) const {
  if (video.rank() != 2 || video.dim(0) != video_width_) {
    throw DimensionError("model: video features must be [" + std::to_string(video_width_) + " x n_v], got " +
                         shape_str(video.shape()));
  }
  if (tokens.rank() != 2 || tokens.dim(0) != token_width_) {
    throw DimensionError("model: token features must be [" + std::to_string(token_width_) + " x n_l], got " +
                         shape_str(tokens.shape()));
  }
  const std::size_t n_v = video.dim(1);
  ModelOutput<T> out;
  out.candidates = enumerate_candidates(n_v, duration,
                                        n_v == config_.num_snippets ? sampling_ : SamplingConfig::default_for(n_v));

  Tensor<T> xv = video_->forward(video);
  Tensor<T> xl = language_->forward(tokens, parse);

  std::optional<Tensor<T>> query;
  auto pooled_query = [&](const Tensor<T>& language) {
    auto q = self_attention_pool_query(language, *query_pool_);
    out.query_weights = q.weights;
    return q.pooled;
  };

  switch (config_.fusion) {
    case FusionMode::kGraphMatch:
      for (const auto& layer : fusion_) {
        auto graph = assemble_matching_graph(xv, xl, config_.knn_k, config_.edges);
        auto scalars = compute_edge_scalars(graph);
        auto fused = graph_match_forward(graph, scalars, layer, config_.matching_relu);
        xv = fused.video;
        xl = fused.language;
        out.graph = std::move(graph);
        out.scalars = std::move(scalars);
      }
      if (query_pool_) query = pooled_query(xl);
      break;
    case FusionMode::kHadamard:
      query = pooled_query(xl);
      xv = hadamard_snippet_fusion(xv, *query);
      break;
    case FusionMode::kConcat:
      query = pooled_query(xl);
      xv = concat_snippet_fusion(xv, *query, concat_proj_);
      break;
  }

  const auto mask = out.candidates.template mask<T>();
  auto pooled = masked_attention_pool(xv, query, out.candidates, mask, pooling_);
  out.pooling_weights = pooled.weights;
  const Tensor<T> moments = add(pooled.pooled, positional_embedding_2d<T>(out.candidates, config_.hidden_width));
  auto scores = score_moments(moments, scorer_);
  out.logits = scores.logits;
  out.probabilities = std::move(scores.probabilities);
  return out;
}

template <typename T>
Tensor<T> VlgNet<T>::loss(const ModelOutput<T>& output, const Interval& ground_truth) const {
  return bce_loss(output.logits, soft_iou_labels<T>(output.candidates, ground_truth, config_.loss));
}

template <typename T>
Prediction VlgNet<T>::predict(const ModelOutput<T>& output) const {
  return nms(rank_candidates(output.candidates, output.probabilities), config_.nms_threshold);
}

template class VlgNet<float>;
template class VlgNet<double>;

}  // namespace vlg
