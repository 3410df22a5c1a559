#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vlg/fusion.hpp"
#include "vlg/localization.hpp"
#include "vlg/moments.hpp"

namespace vlg {

enum class FusionMode { kGraphMatch, kHadamard, kConcat };

const char* fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& name);

// Every model, training and evaluation knob. Defaults come from a named
// profile; a JSON config file selects the profile and overrides fields.
struct ModelConfig {
  std::string profile = "synthetic";

  std::size_t hidden_width = 32;  // c
  std::size_t video_blocks = 1;   // b_v
  std::size_t lstm_layers = 1;    // b_s
  std::size_t syntac_layers = 1;  // b_l
  std::size_t knn_k = 3;
  std::size_t cardinality = 4;
  std::size_t bottleneck = 0;       // 0 -> c / 4
  std::size_t attention_width = 0;  // 0 -> c / 2
  std::size_t scorer_hidden = 64;   // 0 -> c
  bool lstm_bidirectional = false;
  bool syntactic_head_to_dependent_only = false;
  bool ordering_bidirectional = true;
  bool input_positional_encoding = false;

  FusionMode fusion = FusionMode::kGraphMatch;
  std::size_t matching_layers = 2;
  bool matching_relu = true;
  EdgeToggles edges;
  PoolingVariant pooling = PoolingVariant::kLearnableCross;

  std::size_t num_snippets = 16;  // n_v
  SamplingConfig sampling;        // dense_limit 0 -> SamplingConfig::default_for(n_v)
  LossConfig loss;
  double nms_threshold = 0.5;
  std::vector<std::size_t> recall_k{1, 5};
  std::vector<double> recall_iou{0.3, 0.5, 0.7};

  double learning_rate = 1e-3;
  std::size_t lr_step_epochs = 10;  // 0 disables decay
  double lr_decay = 0.5;
  std::size_t epochs = 30;
  std::size_t batch_size = 1;
  std::size_t probe_size = 50;
  std::uint64_t seed = 7;

  // Input widths; 0 means "take from the data".
  std::size_t video_feature_width = 0;
  std::size_t token_feature_width = 0;

  static ModelConfig for_profile(const std::string& name);
  static const std::vector<std::string>& profile_names();

  // Starts from the "profile" key (default "synthetic") and applies every other
  // key as an override. Unknown keys and wrongly typed values throw ConfigError.
  static ModelConfig from_json_text(const std::string& text);
  static ModelConfig from_file(const std::string& path);
  std::string to_json_text() const;

  SamplingConfig effective_sampling() const;
  void validate() const;
};

}  // namespace vlg
