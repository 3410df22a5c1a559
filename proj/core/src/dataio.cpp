#include "vlg/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "vlg/error.hpp"

namespace vlg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kTensorMagic[4] = {'V', 'L', 'G', 'T'};
constexpr char kCheckpointMagic[4] = {'V', 'L', 'G', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

// Throws a truncation error unless `need` bytes are available at `offset`.
void require(std::string_view bytes, std::size_t offset, std::size_t need, const char* what) {
  if (bytes.size() < offset || bytes.size() - offset < need) {
    throw FormatError("truncated " + std::string(what) + " at byte " + std::to_string(offset) + ": expected " +
                      std::to_string(need) + " bytes, got " + std::to_string(bytes.size() - std::min(offset, bytes.size())));
  }
}

std::string at_line(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line) + ": "; }

}  // namespace

// ---- tensors -------------------------------------------------------------------

std::string encode_tensor(const Tensor<float>& tensor) {
  if (!tensor.defined()) throw ValidationError("cannot encode an undefined tensor");
  std::string out(kTensorMagic, 4);
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(extent));
  put_u32(out, static_cast<std::uint32_t>(tensor.numel()));
  for (float v : tensor.data()) {
    if (!std::isfinite(v)) throw ValidationError("cannot encode a tensor with non-finite values");
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Tensor<float> decode_tensor(std::string_view bytes, std::size_t& offset) {
  require(bytes, offset, 12, "tensor header");
  if (bytes.substr(offset, 4) != std::string_view(kTensorMagic, 4)) {
    throw FormatError("bad tensor magic at byte " + std::to_string(offset));
  }
  const auto version = get_u32(bytes, offset + 4);
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version) + " at byte " +
                      std::to_string(offset + 4));
  }
  const auto rank = get_u32(bytes, offset + 8);
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank) + " at byte " + std::to_string(offset + 8));
  offset += 12;
  require(bytes, offset, 4 * (rank + 1), "tensor header");
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (std::uint32_t r = 0; r < rank; ++r) {
    shape[r] = get_u32(bytes, offset + 4 * r);
    if (shape[r] == 0) throw FormatError("zero tensor extent at byte " + std::to_string(offset + 4 * r));
    numel *= shape[r];
    if (numel > (1ull << 32)) throw FormatError("tensor too large at byte " + std::to_string(offset + 4 * r));
  }
  offset += 4 * rank;
  const auto count = get_u32(bytes, offset);
  if (count != numel) {
    throw FormatError("tensor element count " + std::to_string(count) + " at byte " + std::to_string(offset) +
                      " does not match extents " + shape_str(shape));
  }
  offset += 4;
  const std::size_t payload = 4 * static_cast<std::size_t>(count);
  if (bytes.size() - offset < payload) {
    throw FormatError("truncated tensor payload at byte " + std::to_string(offset) + ": expected " +
                      std::to_string(payload) + " bytes, got " + std::to_string(bytes.size() - offset));
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite tensor value at byte " + std::to_string(offset + 4 * i));
    }
  }
  offset += payload;
  return Tensor<float>::from(std::move(shape), std::move(values));
}

Tensor<float> decode_tensor(std::string_view bytes) {
  std::size_t offset = 0;
  auto tensor = decode_tensor(bytes, offset);
  if (offset != bytes.size()) {
    throw FormatError("trailing bytes after tensor at byte " + std::to_string(offset) + ": expected " +
                      std::to_string(offset) + " bytes, got " + std::to_string(bytes.size()));
  }
  return tensor;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_bytes(const std::string& path, std::string_view bytes) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PathError("write failed for '" + path + "'");
}

void write_tensor(const std::string& path, const Tensor<float>& tensor) { write_file_bytes(path, encode_tensor(tensor)); }

Tensor<float> read_tensor(const std::string& path) {
  try {
    return decode_tensor(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

Shape read_tensor_shape(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open '" + path + "'");
  std::string head(12, '\0');
  in.read(head.data(), 12);
  head.resize(static_cast<std::size_t>(in.gcount()));
  try {
    require(head, 0, 12, "tensor header");
    if (head.substr(0, 4) != std::string(kTensorMagic, 4)) throw FormatError("bad tensor magic at byte 0");
    if (get_u32(head, 4) != kTensorVersion) throw FormatError("unsupported tensor version at byte 4");
    const auto rank = get_u32(head, 8);
    if (rank > 8) throw FormatError("implausible tensor rank at byte 8");
    std::string extents(4 * rank, '\0');
    in.read(extents.data(), static_cast<std::streamsize>(extents.size()));
    extents.resize(static_cast<std::size_t>(in.gcount()));
    require(extents, 0, 4 * rank, "tensor header");
    Shape shape(rank);
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape[r] = get_u32(extents, 4 * r);
      if (shape[r] == 0) throw FormatError("zero tensor extent at byte " + std::to_string(12 + 4 * r));
    }
    return shape;
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---- manifests -----------------------------------------------------------------

namespace {

const std::set<std::string> kRecordKeys{"id",     "video_feature_path", "num_snippets", "duration_seconds",
                                        "token_feature_path", "tokens", "parse", "gt"};

const json& field(const json& record, const char* key, const std::string& where) {
  if (!record.contains(key)) throw ValidationError(where + "missing field '" + key + "'");
  return record.at(key);
}

std::size_t as_count(const json& v, const char* key, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ValidationError(where + "'" + key + "' must be a positive integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

std::string as_string(const json& v, const char* key, const std::string& where) {
  if (!v.is_string()) throw ValidationError(where + "'" + key + "' must be a string, got " + v.dump());
  return v.get<std::string>();
}

double as_number(const json& v, const char* key, const std::string& where) {
  if (!v.is_number()) throw ValidationError(where + "'" + key + "' must be a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(where + "'" + key + "' must be finite");
  return d;
}

std::string resolve(const fs::path& base, const std::string& relative) {
  const fs::path p(relative);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

DependencyParse parse_arcs(const json& value, std::size_t n_l, const std::string& where) {
  if (!value.is_array()) throw ValidationError(where + "'parse' must be a list of [dependent, head, relation]");
  DependencyParse parse;
  for (const auto& arc : value) {
    if (!arc.is_array() || arc.size() != 3 || !arc[0].is_number_integer() || !arc[1].is_number_integer() ||
        !arc[2].is_string()) {
      throw ValidationError(where + "parse arc must be [dependent, head, relation], got " + arc.dump());
    }
    const long long dep = arc[0].get<long long>();
    const long long head = arc[1].get<long long>();
    if (dep < 1 || dep > static_cast<long long>(n_l)) {
      throw ValidationError(where + "parse references token " + std::to_string(dep) + " of " + std::to_string(n_l));
    }
    if (head < 0 || head > static_cast<long long>(n_l)) {
      throw ValidationError(where + "parse references token " + std::to_string(head) + " of " +
                            std::to_string(n_l));
    }
    DependencyArc a;
    a.dependent = static_cast<std::size_t>(dep - 1);
    if (head > 0) a.head = static_cast<std::size_t>(head - 1);
    a.relation = arc[2].get<std::string>();
    parse.arcs.push_back(std::move(a));
  }
  try {
    parse.validate(n_l);
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
  return parse;
}

}  // namespace

Manifest Manifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  Manifest manifest;
  manifest.path_ = path;

  std::string text;
  std::size_t line_no = 0;
  bool seen_content = false;
  std::set<std::string> ids;
  std::optional<std::size_t> token_width_from_vocab;
  while (std::getline(in, text)) {
    ++line_no;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = at_line(path, line_no);
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(where + "invalid JSON: " + e.what());
    }
    if (!record.is_object()) throw ValidationError(where + "record must be a JSON object");

    if (!seen_content && record.contains("vocabulary_embeddings")) {
      seen_content = true;
      for (const auto& [key, _] : record.items()) {
        if (key != "vocabulary_embeddings" && key != "vocabulary") {
          throw ValidationError(where + "unknown header key '" + key + "'");
        }
      }
      const auto emb_path = resolve(base, as_string(record["vocabulary_embeddings"], "vocabulary_embeddings", where));
      const auto& words = field(record, "vocabulary", where);
      if (!words.is_array() || words.empty()) throw ValidationError(where + "'vocabulary' must be a non-empty list");
      for (const auto& w : words) {
        const auto word = as_string(w, "vocabulary", where);
        if (manifest.vocabulary_index_.count(word)) throw ValidationError(where + "duplicate vocabulary word '" + word + "'");
        manifest.vocabulary_index_[word] = manifest.vocabulary_.size();
        manifest.vocabulary_.push_back(word);
      }
      if (!fs::exists(emb_path)) throw PathError(where + "missing vocabulary embedding file '" + emb_path + "'");
      auto embeddings = read_tensor(emb_path);
      if (embeddings.rank() != 2 || embeddings.dim(1) != manifest.vocabulary_.size()) {
        throw ValidationError(where + "vocabulary embeddings " + shape_str(embeddings.shape()) + " do not match " +
                              std::to_string(manifest.vocabulary_.size()) + " words");
      }
      token_width_from_vocab = embeddings.dim(0);
      manifest.embeddings_ = std::make_shared<const Tensor<float>>(std::move(embeddings));
      continue;
    }
    seen_content = true;

    for (const auto& [key, _] : record.items()) {
      if (!kRecordKeys.count(key)) throw ValidationError(where + "unknown field '" + key + "'");
    }
    ManifestRecord r;
    r.line = line_no;
    r.id = as_string(field(record, "id", where), "id", where);
    if (r.id.empty()) throw ValidationError(where + "'id' must be non-empty");
    if (!ids.insert(r.id).second) throw ValidationError(where + "duplicate id '" + r.id + "'");
    r.num_snippets = as_count(field(record, "num_snippets", where), "num_snippets", where);
    r.duration = as_number(field(record, "duration_seconds", where), "duration_seconds", where);
    if (!(r.duration > 0.0)) throw ValidationError(where + "'duration_seconds' must be positive");

    const auto& tokens = field(record, "tokens", where);
    if (!tokens.is_array() || tokens.empty()) throw ValidationError(where + "'tokens' must be a non-empty list");
    for (const auto& t : tokens) r.tokens.push_back(as_string(t, "tokens", where));
    r.parse = parse_arcs(field(record, "parse", where), r.tokens.size(), where);

    const auto& gt = field(record, "gt", where);
    if (!gt.is_array() || gt.size() != 2) throw ValidationError(where + "'gt' must be [start, end]");
    r.gt = {as_number(gt[0], "gt", where), as_number(gt[1], "gt", where)};
    if (r.gt.start > r.gt.end) {
      throw ValidationError(where + "gt start " + gt[0].dump() + " exceeds end " + gt[1].dump());
    }
    if (!(r.gt.start >= 0.0 && r.gt.start < r.gt.end && r.gt.end <= r.duration)) {
      throw ValidationError(where + "gt " + gt.dump() + " must satisfy 0 <= start < end <= duration " +
                            std::to_string(r.duration));
    }

    r.video_feature_path = resolve(base, as_string(field(record, "video_feature_path", where), "video_feature_path", where));
    if (!fs::exists(r.video_feature_path)) {
      throw PathError(where + "missing video feature file '" + r.video_feature_path + "'");
    }
    const auto vshape = read_tensor_shape(r.video_feature_path);
    if (vshape.size() != 2 || vshape[1] != r.num_snippets) {
      throw ValidationError(where + "video features " + shape_str(vshape) + " do not have num_snippets = " +
                            std::to_string(r.num_snippets) + " columns");
    }
    r.video_width = vshape[0];
    if (!manifest.records_.empty() && manifest.records_.front().video_width != r.video_width) {
      throw ValidationError(where + "video feature width " + std::to_string(r.video_width) + " differs from " +
                            std::to_string(manifest.records_.front().video_width));
    }

    if (record.contains("token_feature_path")) {
      r.token_feature_path = resolve(base, as_string(record["token_feature_path"], "token_feature_path", where));
      if (!fs::exists(*r.token_feature_path)) {
        throw PathError(where + "missing token feature file '" + *r.token_feature_path + "'");
      }
      const auto tshape = read_tensor_shape(*r.token_feature_path);
      if (tshape.size() != 2 || tshape[1] != r.tokens.size()) {
        throw ValidationError(where + "token features " + shape_str(tshape) + " do not have " +
                              std::to_string(r.tokens.size()) + " columns");
      }
      if (token_width_from_vocab && *token_width_from_vocab != tshape[0]) {
        throw ValidationError(where + "token feature width differs from the vocabulary embeddings");
      }
      token_width_from_vocab = tshape[0];
    } else {
      if (!manifest.embeddings_) {
        throw ValidationError(where + "no token_feature_path and no vocabulary header line");
      }
      for (const auto& word : r.tokens) {
        if (!manifest.vocabulary_index_.count(word)) {
          throw ValidationError(where + "token '" + word + "' is not in the vocabulary");
        }
      }
    }
    manifest.records_.push_back(std::move(r));
  }
  return manifest;
}

std::optional<std::size_t> Manifest::find(std::string_view id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id == id) return i;
  }
  return std::nullopt;
}

GroundingSample Manifest::load(std::size_t index) const {
  if (index >= records_.size()) throw DimensionError("manifest index out of range");
  const auto& r = records_[index];
  GroundingSample s;
  s.id = r.id;
  s.snippet_features = read_tensor(r.video_feature_path);
  if (s.snippet_features.shape() != Shape{r.video_width, r.num_snippets}) {
    throw ValidationError(at_line(path_, r.line) + "video features changed on disk");
  }
  if (r.token_feature_path) {
    s.token_features = read_tensor(*r.token_feature_path);
    if (s.token_features.rank() != 2 || s.token_features.dim(1) != r.tokens.size()) {
      throw ValidationError(at_line(path_, r.line) + "token features changed on disk");
    }
  } else {
    const std::size_t width = embeddings_->dim(0), vocab = embeddings_->dim(1);
    std::vector<float> values(width * r.tokens.size());
    for (std::size_t j = 0; j < r.tokens.size(); ++j) {
      const std::size_t w = vocabulary_index_.at(r.tokens[j]);
      for (std::size_t c = 0; c < width; ++c) values[c * r.tokens.size() + j] = embeddings_->data()[c * vocab + w];
    }
    s.token_features = Tensor<float>::from({width, r.tokens.size()}, std::move(values));
  }
  s.tokens = r.tokens;
  s.parse = r.parse;
  s.gt = r.gt;
  s.duration = r.duration;
  return s;
}

std::vector<GroundingSample> Manifest::load_all() const {
  std::vector<GroundingSample> out;
  out.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out.push_back(load(i));
  return out;
}

std::size_t Manifest::video_width() const {
  if (records_.empty()) throw ValidationError(path_ + ": manifest has no records");
  return records_.front().video_width;
}

std::size_t Manifest::token_width() const {
  if (records_.empty()) throw ValidationError(path_ + ": manifest has no records");
  if (embeddings_) return embeddings_->dim(0);
  return read_tensor_shape(*records_.front().token_feature_path)[0];
}

std::string manifest_line(const ManifestRecord& r, const std::string& base_dir) {
  json parse = json::array();
  for (const auto& arc : r.parse.arcs) {
    parse.push_back({arc.dependent + 1, arc.head ? *arc.head + 1 : 0, arc.relation});
  }
  auto relative = [&](const std::string& p) { return fs::path(p).lexically_relative(base_dir).generic_string(); };
  json record{{"id", r.id},
              {"video_feature_path", relative(r.video_feature_path)},
              {"num_snippets", r.num_snippets},
              {"duration_seconds", r.duration},
              {"tokens", r.tokens},
              {"parse", parse},
              {"gt", {r.gt.start, r.gt.end}}};
  if (r.token_feature_path) record["token_feature_path"] = relative(*r.token_feature_path);
  return record.dump();
}

// ---- synthetic data ------------------------------------------------------------

std::size_t SyntheticConfig::test_videos() const {
  return num_test_videos ? num_test_videos : std::max<std::size_t>(1, num_videos / 4);
}

SyntheticConfig SyntheticConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synthetic config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("synthetic config must be a JSON object");
  SyntheticConfig cfg;
  const std::map<std::string, std::size_t*> sizes{
      {"num_videos", &cfg.num_videos},   {"num_test_videos", &cfg.num_test_videos},
      {"snippets", &cfg.snippets},       {"video_width", &cfg.video_width},
      {"token_width", &cfg.token_width}, {"vocabulary", &cfg.vocabulary},
      {"min_length", &cfg.min_length},   {"max_length", &cfg.max_length}};
  for (const auto& [key, value] : doc.items()) {
    if (auto it = sizes.find(key); it != sizes.end()) {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("synthetic config key '" + key + "' must be a non-negative integer");
      }
      *it->second = value.get<std::size_t>();
    } else if (key == "noise") {
      if (!value.is_number()) throw ConfigError("synthetic config key 'noise' must be a number");
      cfg.noise = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("synthetic config key 'seed' must be a non-negative integer");
      }
      cfg.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown synthetic config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void SyntheticConfig::validate() const {
  if (num_videos == 0) throw ConfigError("synthetic: num_videos must be positive");
  if (snippets == 0) throw ConfigError("synthetic: snippets must be positive");
  if (video_width == 0 || token_width == 0) throw ConfigError("synthetic: feature widths must be positive");
  if (video_width % 2 != 0) throw ConfigError("synthetic: video width must be even");
  if (vocabulary < 4) throw ConfigError("synthetic: vocabulary must be at least 4");
  if (min_length == 0 || min_length > max_length) throw ConfigError("synthetic: need 1 <= min_length <= max_length");
  if (max_length > snippets) throw ConfigError("synthetic: moment length exceeds the snippet count");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synthetic: noise must be non-negative");
}

Tensor<float> draw_codebook(std::size_t width, std::size_t count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> codes(count, std::vector<double>(width));
  for (std::size_t k = 0; k < count; ++k) {
    for (;;) {
      for (auto& v : codes[k]) v = normal(rng);
      if (count <= width) {
        for (std::size_t p = 0; p < k; ++p) {
          double dot = 0.0;
          for (std::size_t c = 0; c < width; ++c) dot += codes[k][c] * codes[p][c];
          for (std::size_t c = 0; c < width; ++c) codes[k][c] -= dot * codes[p][c];
        }
      }
      double norm = 0.0;
      for (double v : codes[k]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (auto& v : codes[k]) v /= norm;
      break;
    }
  }
  std::vector<float> values(width * count);
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t c = 0; c < width; ++c) values[c * count + k] = static_cast<float>(codes[k][c]);
  return Tensor<float>::from({width, count}, std::move(values));
}

namespace {

std::string word_name(std::size_t index) {
  std::ostringstream out;
  out << 'w' << (index < 10 ? "0" : "") << index;
  return out.str();
}

std::string sample_id(const char* split, std::size_t index) {
  std::ostringstream out;
  out << split << '_';
  out.width(4);
  out.fill('0');
  out << index;
  return out.str();
}

// k distinct values from `pool` in random order.
std::vector<std::size_t> draw_distinct(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k && !pool.empty(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t at = pick(rng);
    out.push_back(pool[at]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return out;
}

}  // namespace

SyntheticSummary generate_synthetic(const SyntheticConfig& config, const std::string& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "features", ec);
  if (ec) throw PathError("cannot create '" + out_dir + "': " + ec.message());

  Rng rng(config.seed);
  const auto video_codes = draw_codebook(config.video_width, config.vocabulary, rng);
  const auto token_codes = draw_codebook(config.token_width, config.vocabulary, rng);
  write_tensor((fs::path(out_dir) / "vocab.vlgt").string(), token_codes);

  std::vector<std::string> vocabulary;
  for (std::size_t w = 0; w < config.vocabulary; ++w) vocabulary.push_back(word_name(w));
  const std::string header = json{{"vocabulary_embeddings", "vocab.vlgt"}, {"vocabulary", vocabulary}}.dump();

  const std::size_t n_v = config.snippets, c_v = config.video_width, vocab = config.vocabulary;
  const double noise_std = config.noise / std::sqrt(static_cast<double>(c_v));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> code_count(2, std::min<std::size_t>(4, vocab));
  std::uniform_int_distribution<std::size_t> length(config.min_length, config.max_length);
  std::vector<std::size_t> all_codes(vocab);
  for (std::size_t w = 0; w < vocab; ++w) all_codes[w] = w;

  // Mean of the chosen code columns plus isotropic noise, written into column i.
  auto fill = [&](std::vector<float>& values, std::size_t i, const std::vector<std::size_t>& codes) {
    for (std::size_t c = 0; c < c_v; ++c) {
      double v = 0.0;
      for (auto w : codes) v += video_codes.data()[c * vocab + w];
      v /= static_cast<double>(codes.size());
      if (noise_std > 0.0) v += noise_std * noise(rng);
      values[c * n_v + i] = static_cast<float>(v);
    }
  };

  SyntheticSummary summary;
  auto write_split = [&](const char* split, std::size_t count, const std::string& manifest_name) {
    std::string text = header + "\n";
    for (std::size_t v = 0; v < count; ++v) {
      const auto id = sample_id(split, v);
      const auto target = draw_distinct(all_codes, code_count(rng), rng);
      const std::size_t len = length(rng);
      std::uniform_int_distribution<std::size_t> start_dist(0, n_v - len);
      const std::size_t start = start_dist(rng);

      std::vector<std::size_t> others;
      for (auto w : all_codes)
        if (std::find(target.begin(), target.end(), w) == target.end()) others.push_back(w);
      if (others.size() < 2) others = all_codes;

      std::vector<float> values(c_v * n_v);
      for (std::size_t i = start; i < start + len; ++i) fill(values, i, target);
      // Distractor runs outside the planted span.
      for (std::size_t i = 0; i < n_v;) {
        if (i == start) {
          i += len;
          continue;
        }
        const std::size_t limit = i < start ? start : n_v;
        const std::size_t run = std::min(length(rng), limit - i);
        std::uniform_int_distribution<std::size_t> distractor_count(2, std::min<std::size_t>(4, others.size()));
        const auto codes = draw_distinct(others, distractor_count(rng), rng);
        for (std::size_t j = i; j < i + run; ++j) fill(values, j, codes);
        i += run;
      }
      const auto feature_rel = "features/" + id + ".vlgt";
      write_tensor((fs::path(out_dir) / feature_rel).string(), Tensor<float>::from({c_v, n_v}, std::move(values)));

      ManifestRecord record;
      record.id = id;
      record.video_feature_path = (fs::path(out_dir) / feature_rel).string();
      record.num_snippets = n_v;
      record.duration = static_cast<double>(n_v);
      for (auto w : target) record.tokens.push_back(vocabulary[w]);
      record.parse = DependencyParse::chain(target.size());
      record.gt = {static_cast<double>(start), static_cast<double>(start + len)};
      text += manifest_line(record, out_dir) + "\n";
      ++summary.length_histogram[len];
    }
    const auto manifest_path = (fs::path(out_dir) / manifest_name).string();
    write_file_bytes(manifest_path, text);
    return manifest_path;
  };

  summary.train_manifest = write_split("train", config.num_videos, "train.jsonl");
  summary.train_videos = config.num_videos;
  summary.test_manifest = write_split("test", config.test_videos(), "test.jsonl");
  summary.test_videos = config.test_videos();
  return summary;
}

// ---- checkpoints ---------------------------------------------------------------

std::string encode_checkpoint(const ModelConfig& config, const ParameterSet<float>& params) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const auto text = config.to_json_text();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& entry : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(entry.name.size()));
    out += entry.name;
    out += encode_tensor(entry.tensor.detach());
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  std::size_t offset = 0;
  require(bytes, 0, 12, "checkpoint header");
  if (bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("bad checkpoint magic at byte 0");
  const auto version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at byte 4");
  }
  const auto json_len = get_u32(bytes, 8);
  offset = 12;
  require(bytes, offset, json_len, "checkpoint config");
  Checkpoint checkpoint;
  checkpoint.config = ModelConfig::from_json_text(std::string(bytes.substr(offset, json_len)));
  offset += json_len;
  require(bytes, offset, 4, "checkpoint tensor count");
  const auto count = get_u32(bytes, offset);
  offset += 4;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    require(bytes, offset, 4, "checkpoint tensor name");
    const auto name_len = get_u32(bytes, offset);
    offset += 4;
    require(bytes, offset, name_len, "checkpoint tensor name");
    std::string name(bytes.substr(offset, name_len));
    if (!names.insert(name).second) throw FormatError("duplicate checkpoint tensor '" + name + "' at byte " + std::to_string(offset));
    offset += name_len;
    checkpoint.tensors.push_back({std::move(name), decode_tensor(bytes, offset)});
  }
  if (offset != bytes.size()) throw FormatError("trailing bytes after checkpoint at byte " + std::to_string(offset));
  return checkpoint;
}

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParameterSet<float>& params) {
  write_file_bytes(path, encode_checkpoint(config, params));
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void apply_checkpoint(const Checkpoint& checkpoint, ParameterSet<float>& params) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& t : checkpoint.tensors) by_name[t.name] = &t.tensor;
  for (const auto& entry : params.entries()) {
    const auto it = by_name.find(entry.name);
    if (it == by_name.end()) throw ConfigError("checkpoint is missing parameter '" + entry.name + "'");
    if (it->second->shape() != entry.tensor.shape()) {
      throw ConfigError("checkpoint parameter '" + entry.name + "' has shape " + shape_str(it->second->shape()) +
                        ", model expects " + shape_str(entry.tensor.shape()));
    }
  }
  for (const auto& t : checkpoint.tensors) {
    if (!params.contains(t.name)) throw ConfigError("checkpoint has unexpected parameter '" + t.name + "'");
  }
  for (const auto& entry : params.entries()) {
    auto target = entry.tensor;
    const auto& source = by_name[entry.name]->data();
    std::copy(source.begin(), source.end(), target.mutable_data().begin());
  }
}

// ---- predictions ---------------------------------------------------------------

std::string encode_predictions(const std::vector<SamplePrediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    json moments = json::array();
    for (const auto& m : p.moments) moments.push_back({m.start, m.end, m.score});
    out += json{{"id", p.id}, {"moments", moments}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<SamplePrediction> decode_predictions(std::string_view text) {
  std::vector<SamplePrediction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = "predictions:" + std::to_string(line_no) + ": ";
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + "invalid JSON: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() || !record.contains("moments") ||
        !record["moments"].is_array() || record.size() != 2) {
      throw FormatError(where + "expected {\"id\": string, \"moments\": [[t_s, t_e, score], ...]}");
    }
    SamplePrediction p;
    p.id = record["id"].get<std::string>();
    for (const auto& m : record["moments"]) {
      if (!m.is_array() || m.size() != 3 || !m[0].is_number() || !m[1].is_number() || !m[2].is_number()) {
        throw FormatError(where + "moment must be [t_s, t_e, score], got " + m.dump());
      }
      ScoredMoment sm{m[0].get<double>(), m[1].get<double>(), m[2].get<double>()};
      if (sm.start > sm.end) throw FormatError(where + "moment start exceeds end: " + m.dump());
      p.moments.push_back(sm);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<SamplePrediction>& predictions) {
  write_file_bytes(path, encode_predictions(predictions));
}

std::vector<SamplePrediction> read_predictions(const std::string& path) {
  try {
    return decode_predictions(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace vlg
