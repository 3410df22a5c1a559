#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlg/config.hpp"
#include "vlg/graphs.hpp"
#include "vlg/localization.hpp"
#include "vlg/params.hpp"
#include "vlg/tensor.hpp"

namespace vlg {

// ---- VLGT tensor files ------------------------------------------------------
//
// "VLGT" | u32 version (1) | u32 rank | u32 extent * rank | u32 element count |
// f32 * count, all little-endian, row-major.

inline constexpr std::uint32_t kTensorVersion = 1;

std::string encode_tensor(const Tensor<float>& tensor);

// Decodes one tensor starting at `offset` and advances it past the payload.
// Errors report absolute byte offsets within `bytes`.
Tensor<float> decode_tensor(std::string_view bytes, std::size_t& offset);
Tensor<float> decode_tensor(std::string_view bytes);

void write_tensor(const std::string& path, const Tensor<float>& tensor);
Tensor<float> read_tensor(const std::string& path);
// Reads and checks only the header.
Shape read_tensor_shape(const std::string& path);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

// ---- Manifests ---------------------------------------------------------------

struct GroundingSample {
  std::string id;
  Tensor<float> snippet_features;  // [c_v x n_v]
  Tensor<float> token_features;    // [c_l x n_l]
  std::vector<std::string> tokens;
  DependencyParse parse;
  Interval gt;
  double duration = 0.0;
};

struct ManifestRecord {
  std::size_t line = 0;
  std::string id;
  std::string video_feature_path;  // resolved against the manifest directory
  std::size_t num_snippets = 0;
  double duration = 0.0;
  std::optional<std::string> token_feature_path;
  std::vector<std::string> tokens;
  DependencyParse parse;  // 0-based after reading
  Interval gt;
  std::size_t video_width = 0;
};

// JSON-lines dataset description. An optional first line
// {"vocabulary_embeddings": FILE, "vocabulary": [WORD, ...]} provides token
// features for records without a token_feature_path.
class Manifest {
 public:
  // Validates every record and checks that referenced files exist with
  // matching extents. Feature payloads are loaded on demand.
  static Manifest read(const std::string& path);

  std::size_t size() const { return records_.size(); }
  const std::vector<ManifestRecord>& records() const { return records_; }
  const std::string& path() const { return path_; }
  std::optional<std::size_t> find(std::string_view id) const;

  GroundingSample load(std::size_t index) const;
  std::vector<GroundingSample> load_all() const;

  std::size_t video_width() const;
  std::size_t token_width() const;

 private:
  std::string path_;
  std::vector<ManifestRecord> records_;
  std::vector<std::string> vocabulary_;
  std::map<std::string, std::size_t> vocabulary_index_;
  std::shared_ptr<const Tensor<float>> embeddings_;  // [c_l x V]
};

// Serializes one record in manifest syntax (1-based parse indices).
std::string manifest_line(const ManifestRecord& record, const std::string& base_dir);

// ---- Synthetic grounding data --------------------------------------------------

struct SyntheticConfig {
  std::size_t num_videos = 200;
  std::size_t num_test_videos = 0;  // 0 -> max(1, num_videos / 4)
  std::size_t snippets = 16;  // n_v
  std::size_t video_width = 32;
  std::size_t token_width = 32;
  std::size_t vocabulary = 16;
  std::size_t min_length = 2;  // planted moment length range, in snippets
  std::size_t max_length = 8;
  double noise = 0.05;  // σ_n, norm of the per-snippet noise vector on average
  std::uint64_t seed = 7;

  std::size_t test_videos() const;
  void validate() const;
  // Keys as the field names; unknown keys throw ConfigError.
  static SyntheticConfig from_json_text(const std::string& text);
};

struct SyntheticSummary {
  std::size_t train_videos = 0;
  std::size_t test_videos = 0;
  std::map<std::size_t, std::size_t> length_histogram;  // planted length -> count
  std::string train_manifest;
  std::string test_manifest;
};

// Writes train.jsonl, test.jsonl, vocab.vlgt and features/<id>.vlgt under
// out_dir. Fully determined by the config.
SyntheticSummary generate_synthetic(const SyntheticConfig& config, const std::string& out_dir);

// Unit-norm code vectors as columns; orthonormal when count <= width.
Tensor<float> draw_codebook(std::size_t width, std::size_t count, Rng& rng);

// ---- Checkpoints --------------------------------------------------------------
//
// "VLGC" | u32 version | u32 json length | config JSON | u32 tensor count |
// (u32 name length | name | VLGT block) * count.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor<float>> tensors;
};

std::string encode_checkpoint(const ModelConfig& config, const ParameterSet<float>& params);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const ModelConfig& config, const ParameterSet<float>& params);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into `params`. Missing, unexpected or reshaped
// tensors throw ConfigError naming the tensor.
void apply_checkpoint(const Checkpoint& checkpoint, ParameterSet<float>& params);

// ---- Predictions ---------------------------------------------------------------

struct SamplePrediction {
  std::string id;
  Prediction moments;
};

std::string encode_predictions(const std::vector<SamplePrediction>& predictions);
std::vector<SamplePrediction> decode_predictions(std::string_view text);
void write_predictions(const std::string& path, const std::vector<SamplePrediction>& predictions);
std::vector<SamplePrediction> read_predictions(const std::string& path);

}  // namespace vlg
