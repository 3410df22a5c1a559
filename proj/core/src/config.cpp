#include "vlg/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "vlg/error.hpp"

namespace vlg {

using nlohmann::json;

const char* fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kGraphMatch:
      return "graph_match";
    case FusionMode::kHadamard:
      return "hadamard";
    case FusionMode::kConcat:
      return "concat";
  }
  return "unknown";
}

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "graph_match") return FusionMode::kGraphMatch;
  if (name == "hadamard") return FusionMode::kHadamard;
  if (name == "concat") return FusionMode::kConcat;
  throw ConfigError("unknown fusion mode '" + name + "'");
}

const std::vector<std::string>& ModelConfig::profile_names() {
  static const std::vector<std::string> names{"activitynet", "tacos", "didemo", "synthetic"};
  return names;
}

ModelConfig ModelConfig::for_profile(const std::string& name) {
  ModelConfig c;
  c.profile = name;
  if (name == "synthetic") return c;

  // Published settings: n_v, (b_v, b_s, b_l), NMS threshold, (θ1, θ2) and the
  // reported IoU columns. Hidden width 512, 32 split-transform-merge paths.
  c.hidden_width = 512;
  c.scorer_hidden = 0;
  c.input_positional_encoding = true;
  c.matching_layers = 1;
  c.matching_relu = false;
  c.cardinality = 32;
  c.bottleneck = 4;
  c.learning_rate = 1e-3;
  c.epochs = 10;
  c.recall_k = {1, 5};
  if (name == "activitynet") {
    c.num_snippets = 64;
    c.video_blocks = 1, c.lstm_layers = 3, c.syntac_layers = 4;
    c.nms_threshold = 0.5;
    c.loss = {0.7, 0.71};
    c.recall_iou = {0.3, 0.5, 0.7};
  } else if (name == "tacos") {
    c.num_snippets = 256;
    c.video_blocks = 4, c.lstm_layers = 5, c.syntac_layers = 2;
    c.nms_threshold = 0.3;
    c.loss = {0.5, 0.7};
    c.recall_iou = {0.1, 0.3, 0.5};
  } else if (name == "didemo") {
    c.num_snippets = 48;
    c.video_blocks = 2, c.lstm_layers = 3, c.syntac_layers = 4;
    c.nms_threshold = 0.5;
    c.loss = {0.69, 1.0};
    c.recall_iou = {0.5, 0.7, 1.0};
  } else {
    throw ConfigError("unknown profile '" + name + "'");
  }
  return c;
}

namespace {

template <typename V>
V typed(const json& value, const std::string& key) {
  try {
    return value.get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
  }
}

std::size_t positive_size(const json& value, const std::string& key, bool allow_zero = true) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer, got " + value.dump());
  }
  const auto v = value.get<std::size_t>();
  if (!allow_zero && v == 0) throw ConfigError("config key '" + key + "' must be positive");
  return v;
}

double number(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError("config key '" + key + "' must be a number, got " + value.dump());
  return value.get<double>();
}

bool boolean(const json& value, const std::string& key) {
  if (!value.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean, got " + value.dump());
  return value.get<bool>();
}

using Setter = std::function<void(ModelConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"hidden_width", [](ModelConfig& c, const json& v) { c.hidden_width = positive_size(v, "hidden_width", false); }},
      {"video_blocks", [](ModelConfig& c, const json& v) { c.video_blocks = positive_size(v, "video_blocks", false); }},
      {"lstm_layers", [](ModelConfig& c, const json& v) { c.lstm_layers = positive_size(v, "lstm_layers", false); }},
      {"syntac_layers", [](ModelConfig& c, const json& v) { c.syntac_layers = positive_size(v, "syntac_layers"); }},
      {"knn_k", [](ModelConfig& c, const json& v) { c.knn_k = positive_size(v, "knn_k", false); }},
      {"cardinality", [](ModelConfig& c, const json& v) { c.cardinality = positive_size(v, "cardinality", false); }},
      {"bottleneck", [](ModelConfig& c, const json& v) { c.bottleneck = positive_size(v, "bottleneck"); }},
      {"attention_width", [](ModelConfig& c, const json& v) { c.attention_width = positive_size(v, "attention_width"); }},
      {"scorer_hidden", [](ModelConfig& c, const json& v) { c.scorer_hidden = positive_size(v, "scorer_hidden"); }},
      {"lstm_bidirectional", [](ModelConfig& c, const json& v) { c.lstm_bidirectional = boolean(v, "lstm_bidirectional"); }},
      {"syntactic_head_to_dependent_only",
       [](ModelConfig& c, const json& v) {
         c.syntactic_head_to_dependent_only = boolean(v, "syntactic_head_to_dependent_only");
       }},
      {"ordering_bidirectional",
       [](ModelConfig& c, const json& v) { c.ordering_bidirectional = boolean(v, "ordering_bidirectional"); }},
      {"input_positional_encoding",
       [](ModelConfig& c, const json& v) { c.input_positional_encoding = boolean(v, "input_positional_encoding"); }},
      {"fusion", [](ModelConfig& c, const json& v) { c.fusion = parse_fusion_mode(typed<std::string>(v, "fusion")); }},
      {"matching_layers",
       [](ModelConfig& c, const json& v) { c.matching_layers = positive_size(v, "matching_layers", false); }},
      {"matching_relu", [](ModelConfig& c, const json& v) { c.matching_relu = boolean(v, "matching_relu"); }},
      {"edges",
       [](ModelConfig& c, const json& v) {
         if (!v.is_object()) throw ConfigError("config key 'edges' must be an object");
         for (const auto& [key, flag] : v.items()) {
           if (key == "ordering") c.edges.ordering = boolean(flag, "edges.ordering");
           else if (key == "semantic") c.edges.semantic = boolean(flag, "edges.semantic");
           else if (key == "matching") c.edges.matching = boolean(flag, "edges.matching");
           else throw ConfigError("unknown config key 'edges." + key + "'");
         }
       }},
      {"pooling",
       [](ModelConfig& c, const json& v) { c.pooling = parse_pooling_variant(typed<std::string>(v, "pooling")); }},
      {"num_snippets", [](ModelConfig& c, const json& v) { c.num_snippets = positive_size(v, "num_snippets", false); }},
      {"sampling",
       [](ModelConfig& c, const json& v) {
         if (!v.is_object()) throw ConfigError("config key 'sampling' must be an object");
         for (const auto& [key, item] : v.items()) {
           if (key == "dense_limit") {
             c.sampling.dense_limit = positive_size(item, "sampling.dense_limit");
           } else if (key == "schedule") {
             if (!item.is_array()) throw ConfigError("'sampling.schedule' must be a list of [max_span, stride]");
             c.sampling.schedule.clear();
             for (const auto& pair : item) {
               if (!pair.is_array() || pair.size() != 2) {
                 throw ConfigError("'sampling.schedule' entries must be [max_span, stride]");
               }
               c.sampling.schedule.emplace_back(positive_size(pair[0], "sampling.schedule"),
                                                positive_size(pair[1], "sampling.schedule"));
             }
           } else {
             throw ConfigError("unknown config key 'sampling." + key + "'");
           }
         }
       }},
      {"iou_thresholds",
       [](ModelConfig& c, const json& v) {
         if (!v.is_array() || v.size() != 2) throw ConfigError("'iou_thresholds' must be [θ1, θ2]");
         c.loss = {number(v[0], "iou_thresholds"), number(v[1], "iou_thresholds")};
       }},
      {"nms_threshold", [](ModelConfig& c, const json& v) { c.nms_threshold = number(v, "nms_threshold"); }},
      {"recall_k",
       [](ModelConfig& c, const json& v) {
         if (!v.is_array()) throw ConfigError("'recall_k' must be a list");
         c.recall_k.clear();
         for (const auto& k : v) c.recall_k.push_back(positive_size(k, "recall_k", false));
       }},
      {"recall_iou",
       [](ModelConfig& c, const json& v) {
         if (!v.is_array()) throw ConfigError("'recall_iou' must be a list");
         c.recall_iou.clear();
         for (const auto& t : v) c.recall_iou.push_back(number(t, "recall_iou"));
       }},
      {"learning_rate", [](ModelConfig& c, const json& v) { c.learning_rate = number(v, "learning_rate"); }},
      {"lr_step_epochs", [](ModelConfig& c, const json& v) { c.lr_step_epochs = positive_size(v, "lr_step_epochs"); }},
      {"lr_decay", [](ModelConfig& c, const json& v) { c.lr_decay = number(v, "lr_decay"); }},
      {"epochs", [](ModelConfig& c, const json& v) { c.epochs = positive_size(v, "epochs", false); }},
      {"batch_size", [](ModelConfig& c, const json& v) { c.batch_size = positive_size(v, "batch_size", false); }},
      {"probe_size", [](ModelConfig& c, const json& v) { c.probe_size = positive_size(v, "probe_size"); }},
      {"seed", [](ModelConfig& c, const json& v) { c.seed = static_cast<std::uint64_t>(positive_size(v, "seed")); }},
      {"video_feature_width",
       [](ModelConfig& c, const json& v) { c.video_feature_width = positive_size(v, "video_feature_width"); }},
      {"token_feature_width",
       [](ModelConfig& c, const json& v) { c.token_feature_width = positive_size(v, "token_feature_width"); }},
  };
  return table;
}

}  // namespace

ModelConfig ModelConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::string profile = "synthetic";
  if (doc.contains("profile")) profile = typed<std::string>(doc["profile"], "profile");
  ModelConfig config = for_profile(profile);
  const auto& table = setters();
  for (const auto& [key, value] : doc.items()) {
    if (key == "profile") continue;
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(config, value);
  }
  config.validate();
  return config;
}

ModelConfig ModelConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string ModelConfig::to_json_text() const {
  json schedule = json::array();
  for (const auto& [span, stride] : sampling.schedule) schedule.push_back({span, stride});
  json doc{
      {"profile", profile},
      {"hidden_width", hidden_width},
      {"video_blocks", video_blocks},
      {"lstm_layers", lstm_layers},
      {"syntac_layers", syntac_layers},
      {"knn_k", knn_k},
      {"cardinality", cardinality},
      {"bottleneck", bottleneck},
      {"attention_width", attention_width},
      {"scorer_hidden", scorer_hidden},
      {"lstm_bidirectional", lstm_bidirectional},
      {"syntactic_head_to_dependent_only", syntactic_head_to_dependent_only},
      {"ordering_bidirectional", ordering_bidirectional},
      {"input_positional_encoding", input_positional_encoding},
      {"fusion", fusion_mode_name(fusion)},
      {"matching_layers", matching_layers},
      {"matching_relu", matching_relu},
      {"edges", {{"ordering", edges.ordering}, {"semantic", edges.semantic}, {"matching", edges.matching}}},
      {"pooling", pooling_variant_name(pooling)},
      {"num_snippets", num_snippets},
      {"sampling", {{"dense_limit", sampling.dense_limit}, {"schedule", schedule}}},
      {"iou_thresholds", {loss.low, loss.high}},
      {"nms_threshold", nms_threshold},
      {"recall_k", recall_k},
      {"recall_iou", recall_iou},
      {"learning_rate", learning_rate},
      {"lr_step_epochs", lr_step_epochs},
      {"lr_decay", lr_decay},
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"probe_size", probe_size},
      {"seed", seed},
      {"video_feature_width", video_feature_width},
      {"token_feature_width", token_feature_width},
  };
  return doc.dump(2);
}

SamplingConfig ModelConfig::effective_sampling() const {
  return sampling.dense_limit == 0 ? SamplingConfig::default_for(num_snippets) : sampling;
}

void ModelConfig::validate() const {
  if (hidden_width % 2 != 0) throw ConfigError("hidden_width must be even for the 2D positional embedding");
  if (knn_k == 0) throw ConfigError("knn_k must be positive");
  effective_sampling().validate(num_snippets);
  loss.validate();
  if (!(nms_threshold > 0.0 && nms_threshold <= 1.0)) throw ConfigError("nms_threshold must lie in (0, 1]");
  if (recall_k.empty() || recall_iou.empty()) throw ConfigError("recall_k and recall_iou must be non-empty");
  for (double t : recall_iou) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("recall_iou values must lie in (0, 1]");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (video_feature_width % 2 != 0) throw ConfigError("video_feature_width must be even");
  if (bottleneck * cardinality > 4 * hidden_width) throw ConfigError("bottleneck * cardinality exceeds 4c");
}

}  // namespace vlg
