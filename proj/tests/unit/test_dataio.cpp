#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vlg/dataio.hpp"
#include "vlg/error.hpp"
#include "vlg/model.hpp"
#include "vlg/training.hpp"

namespace vlg {
namespace {

using testing::TempDir;

Tensor<float> random_float(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_tensor<float>(std::move(shape), rng, -3.0, 3.0);
}

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), 4 * a.numel()) == 0;
}

template <typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// ---- VLGT ----

TEST(Vlgt, RoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_float({1 + seed % 4, 1 + seed % 7, 2}, seed);
    const auto bytes = encode_tensor(t);
    EXPECT_TRUE(same_bits(decode_tensor(bytes), t));
    EXPECT_EQ(encode_tensor(decode_tensor(bytes)), bytes);
  }
}

TEST(Vlgt, LayoutMatchesTheByteFormat) {
  const auto bytes = encode_tensor(Tensor<float>::from({2, 1}, {1.0f, -2.0f}));
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 * 4 + 4 + 2 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "VLGT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);  // rank
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 2);  // element count
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[26]), 0x80);
}

TEST(Vlgt, ScalarRoundTrip) {
  const auto t = Tensor<float>::scalar(2.5f);
  const auto bytes = encode_tensor(t);
  EXPECT_EQ(bytes.size(), 16u + 4u);
  EXPECT_TRUE(same_bits(decode_tensor(bytes), t));
}

TEST(Vlgt, FileRoundTrip) {
  TempDir dir("vlgt");
  const auto t = random_float({3, 5}, 4);
  write_tensor(dir.str("t.vlgt"), t);
  EXPECT_TRUE(same_bits(read_tensor(dir.str("t.vlgt")), t));
  EXPECT_EQ(read_tensor_shape(dir.str("t.vlgt")), (Shape{3, 5}));
}

TEST(Vlgt, TruncationReportsOffsetAndCounts) {
  const auto bytes = encode_tensor(random_float({2, 3}, 1));
  const auto msg = error_message([&] { decode_tensor(std::string_view(bytes).substr(0, 6)); });
  EXPECT_NE(msg.find("truncated tensor header at byte 0: expected 12 bytes, got 6"), std::string::npos) << msg;
  const auto payload = error_message([&] { decode_tensor(std::string_view(bytes).substr(0, bytes.size() - 1)); });
  EXPECT_NE(payload.find("truncated tensor payload at byte 24: expected 24 bytes, got 23"), std::string::npos)
      << payload;
}

TEST(Vlgt, CorruptInputsAreRejected) {
  const auto good = encode_tensor(random_float({2, 3}, 1));
  struct Case {
    std::string bytes;
    std::string needle;
  };
  std::vector<Case> cases;
  auto patched = [&](std::size_t at, unsigned char value) {
    auto b = good;
    b[at] = static_cast<char>(value);
    return b;
  };
  cases.push_back({patched(0, 'X'), "bad tensor magic"});
  cases.push_back({patched(4, 9), "unsupported tensor version"});
  cases.push_back({patched(8, 200), "implausible tensor rank"});
  cases.push_back({patched(12, 0), "zero tensor extent"});
  cases.push_back({patched(20, 7), "does not match extents"});
  cases.push_back({good + "x", "trailing bytes"});
  cases.push_back({"", "truncated tensor header"});
  {
    auto b = good;
    const std::uint32_t nan_bits = 0x7fc00000u;
    std::memcpy(b.data() + 24, &nan_bits, 4);
    cases.push_back({b, "non-finite tensor value at byte 24"});
  }
  for (const auto& c : cases) {
    EXPECT_THROW(decode_tensor(c.bytes), FormatError) << c.needle;
    EXPECT_NE(error_message([&] { decode_tensor(c.bytes); }).find(c.needle), std::string::npos) << c.needle;
  }
}

TEST(Vlgt, ReadErrorsNameThePath) {
  TempDir dir("vlgt_err");
  EXPECT_THROW(read_tensor(dir.str("missing.vlgt")), PathError);
  write_file_bytes(dir.str("bad.vlgt"), "VLGT");
  const auto msg = error_message([&] { read_tensor(dir.str("bad.vlgt")); });
  EXPECT_NE(msg.find(dir.str("bad.vlgt")), std::string::npos) << msg;
}

TEST(Vlgt, NonFiniteValuesAreNotWritten) {
  auto t = Tensor<float>::from({2}, {1.0f, std::numeric_limits<float>::infinity()});
  EXPECT_THROW(encode_tensor(t), ValidationError);
}

// ---- Manifests ----

struct SmallDataset {
  TempDir dir{"manifest"};
  std::string line(const std::string& id, const std::string& extra_gt = "[1.0, 3.0]",
                   const std::string& parse = "[[1, 2, \"amod\"], [2, 0, \"root\"]]") const {
    return "{\"id\":\"" + id + "\",\"video_feature_path\":\"v.vlgt\",\"num_snippets\":4,\"duration_seconds\":8.0," +
           "\"token_feature_path\":\"t.vlgt\",\"tokens\":[\"red\",\"car\"],\"parse\":" + parse +
           ",\"gt\":" + extra_gt + "}";
  }
  SmallDataset() {
    write_tensor(dir.str("v.vlgt"), random_float({6, 4}, 1));
    write_tensor(dir.str("t.vlgt"), random_float({5, 2}, 2));
  }
  std::string write(const std::string& text) const {
    write_file_bytes(dir.str("m.jsonl"), text);
    return dir.str("m.jsonl");
  }
};

TEST(Manifest, ReadsRecordsAndLoadsFeatures) {
  SmallDataset d;
  const auto m = Manifest::read(d.write(d.line("a") + "\n\n" + d.line("b") + "\n"));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.records()[1].line, 3u);
  EXPECT_EQ(m.video_width(), 6u);
  EXPECT_EQ(m.token_width(), 5u);
  EXPECT_EQ(*m.find("b"), 1u);
  EXPECT_FALSE(m.find("zzz"));
  const auto s = m.load(0);
  EXPECT_EQ(s.snippet_features.shape(), (Shape{6, 4}));
  EXPECT_DOUBLE_EQ(s.gt.start, 1.0);
  EXPECT_DOUBLE_EQ(s.gt.end, 3.0);
  // 1-based on disk, 0-based in memory.
  ASSERT_EQ(s.parse.arcs.size(), 2u);
  EXPECT_EQ(s.parse.arcs[0].dependent, 0u);
  EXPECT_EQ(*s.parse.arcs[0].head, 1u);
  EXPECT_FALSE(s.parse.arcs[1].head);
}

TEST(Manifest, RecordLineRoundTrip) {
  SmallDataset d;
  const auto first = Manifest::read(d.write(d.line("a") + "\n"));
  const auto text = manifest_line(first.records()[0], d.dir.str());
  const auto second = Manifest::read(d.write(text + "\n"));
  EXPECT_EQ(manifest_line(second.records()[0], d.dir.str()), text);
  EXPECT_TRUE(same_bits(second.load(0).token_features, first.load(0).token_features));
}

TEST(Manifest, ValidationErrorsCarryLineNumbers) {
  SmallDataset d;
  struct Case {
    std::string second_line;
    std::string needle;
  };
  const std::vector<Case> cases{
      {d.line("b", "[5.0, 2.0]"), "m.jsonl:2: gt start 5.0 exceeds end 2.0"},
      {d.line("b", "[1.0, 9.0]"), ":2: gt"},
      {d.line("b", "[1.0, 3.0]", "[[99, 0, \"root\"]]"), ":2: parse references token 99 of 2"},
      {d.line("a"), ":2: duplicate id 'a'"},
      {"{\"id\":\"b\",\"bogus\":1}", ":2: unknown field 'bogus'"},
      {"[1,2]", ":2: record must be a JSON object"},
  };
  for (const auto& c : cases) {
    const auto path = d.write(d.line("a") + "\n" + c.second_line + "\n");
    const auto msg = error_message([&] { Manifest::read(path); });
    EXPECT_NE(msg.find(c.needle), std::string::npos) << "got: " << msg;
  }
  EXPECT_THROW(Manifest::read(d.write("{not json\n")), FormatError);
}

TEST(Manifest, MissingFilesArePathErrors) {
  SmallDataset d;
  EXPECT_THROW(Manifest::read(d.dir.str("nope.jsonl")), PathError);
  auto text = d.line("a");
  text.replace(text.find("v.vlgt"), 6, "gone.vlgt");
  EXPECT_THROW(Manifest::read(d.write(text + "\n")), PathError);
}

TEST(Manifest, FeatureExtentsMustMatch) {
  SmallDataset d;
  auto text = d.line("a");
  text.replace(text.find("\"num_snippets\":4"), 16, "\"num_snippets\":5");
  EXPECT_THROW(Manifest::read(d.write(text + "\n")), ValidationError);
}

TEST(Manifest, VocabularyHeaderSuppliesTokenFeatures) {
  SmallDataset d;
  const auto vocab = random_float({5, 3}, 9);
  write_tensor(d.dir.str("vocab.vlgt"), vocab);
  const std::string header = R"({"vocabulary_embeddings":"vocab.vlgt","vocabulary":["red","car","sky"]})";
  auto record = d.line("a");
  record.replace(record.find("\"token_feature_path\":\"t.vlgt\","), 30, "");
  const auto m = Manifest::read(d.write(header + "\n" + record + "\n"));
  const auto s = m.load(0);
  ASSERT_EQ(s.token_features.shape(), (Shape{5, 2}));
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(s.token_features.data()[c * 2 + 0], vocab.data()[c * 3 + 0]);
    EXPECT_EQ(s.token_features.data()[c * 2 + 1], vocab.data()[c * 3 + 1]);
  }
  auto unknown = record;
  unknown.replace(unknown.find("\"red\""), 5, "\"blue\"");
  EXPECT_THROW(Manifest::read(d.write(header + "\n" + unknown + "\n")), ValidationError);
}

// ---- Synthetic data ----

SyntheticConfig small_synthetic(double noise, std::size_t videos = 40) {
  SyntheticConfig c;
  c.num_videos = videos;
  c.num_test_videos = 10;
  c.noise = noise;
  return c;
}

TEST(Synthetic, SameConfigGivesIdenticalBytes) {
  TempDir a("syn_a"), b("syn_b");
  const auto cfg = small_synthetic(0.05, 12);
  generate_synthetic(cfg, a.str());
  generate_synthetic(cfg, b.str());
  for (const auto& leaf : {"train.jsonl", "test.jsonl", "vocab.vlgt", "features/train_0007.vlgt"}) {
    EXPECT_EQ(read_file_bytes(a.str(leaf)), read_file_bytes(b.str(leaf))) << leaf;
  }
  auto other = cfg;
  other.seed = 8;
  TempDir c("syn_c");
  generate_synthetic(other, c.str());
  EXPECT_NE(read_file_bytes(a.str("features/train_0000.vlgt")), read_file_bytes(c.str("features/train_0000.vlgt")));
}

TEST(Synthetic, SummaryAndDefaultSplit) {
  TempDir dir("syn_sum");
  SyntheticConfig cfg;
  cfg.num_videos = 20;
  const auto summary = generate_synthetic(cfg, dir.str());
  EXPECT_EQ(summary.train_videos, 20u);
  EXPECT_EQ(summary.test_videos, 5u);
  std::size_t total = 0;
  for (const auto& [len, count] : summary.length_histogram) {
    EXPECT_GE(len, cfg.min_length);
    EXPECT_LE(len, cfg.max_length);
    total += count;
  }
  EXPECT_EQ(total, 25u);
  EXPECT_EQ(Manifest::read(summary.test_manifest).size(), 5u);
}

TEST(Synthetic, ConfigValidation) {
  EXPECT_THROW(SyntheticConfig::from_json_text(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(SyntheticConfig::from_json_text(R"({"noise": -1})"), ConfigError);
  EXPECT_THROW(SyntheticConfig::from_json_text(R"({"max_length": 40})"), ConfigError);
  EXPECT_THROW(SyntheticConfig::from_json_text(R"({"video_width": 7})"), ConfigError);
  EXPECT_EQ(SyntheticConfig::from_json_text(R"({"num_videos": 9})").num_videos, 9u);
}

TEST(Synthetic, CodebookIsOrthonormal) {
  Rng rng(3);
  const auto book = draw_codebook(32, 16, rng);
  for (std::size_t a = 0; a < 16; ++a) {
    for (std::size_t b = 0; b < 16; ++b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < 32; ++c) dot += double(book.data()[c * 16 + a]) * book.data()[c * 16 + b];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-5);
    }
  }
}

std::size_t word_index(const std::string& word) { return std::stoul(word.substr(1)); }

// The video codebook is the first draw from the generator's RNG.
Tensor<float> video_codebook(const SyntheticConfig& cfg) {
  Rng rng(cfg.seed);
  return draw_codebook(cfg.video_width, cfg.vocabulary, rng);
}

std::vector<double> column(const Tensor<float>& t, std::size_t col) {
  std::vector<double> out(t.dim(0));
  for (std::size_t r = 0; r < t.dim(0); ++r) out[r] = t.data()[r * t.dim(1) + col];
  return out;
}

TEST(Synthetic, NoiselessSpanIsTheExactCodeAverage) {
  TempDir dir("syn_exact");
  const auto cfg = small_synthetic(0.0, 30);
  const auto summary = generate_synthetic(cfg, dir.str());
  const auto book = video_codebook(cfg);
  for (const auto& s : Manifest::read(summary.train_manifest).load_all()) {
    for (std::size_t i = 0; i < cfg.snippets; ++i) {
      const auto x = column(s.snippet_features, i);
      double err = 0.0;
      for (std::size_t c = 0; c < cfg.video_width; ++c) {
        double mean = 0.0;
        for (const auto& w : s.tokens) mean += book.data()[c * cfg.vocabulary + word_index(w)];
        err = std::max(err, std::abs(x[c] - mean / double(s.tokens.size())));
      }
      const bool inside = double(i) >= s.gt.start && double(i) < s.gt.end;
      if (inside) {
        EXPECT_LT(err, 1e-6) << s.id << " snippet " << i;
      } else {
        EXPECT_GT(err, 0.1) << s.id << " snippet " << i;
      }
    }
  }
}

TEST(Synthetic, NearestCodesRecoverTheQueryUnderNoise) {
  TempDir dir("syn_decode");
  const auto cfg = small_synthetic(0.1, 100);
  const auto summary = generate_synthetic(cfg, dir.str());
  const auto book = video_codebook(cfg);
  std::size_t checked = 0;
  for (const auto& s : Manifest::read(summary.train_manifest).load_all()) {
    std::set<std::size_t> expected;
    for (const auto& w : s.tokens) expected.insert(word_index(w));
    for (std::size_t i = static_cast<std::size_t>(s.gt.start); i < static_cast<std::size_t>(s.gt.end); ++i) {
      const auto x = column(s.snippet_features, i);
      std::set<std::size_t> decoded;
      for (std::size_t k = 0; k < cfg.vocabulary; ++k) {
        double proj = 0.0;
        for (std::size_t c = 0; c < cfg.video_width; ++c) proj += x[c] * book.data()[c * cfg.vocabulary + k];
        if (proj > 0.125) decoded.insert(k);
      }
      EXPECT_EQ(decoded, expected) << s.id << " snippet " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Synthetic, TemplateMatchingOracleIsPerfectWithoutNoise) {
  TempDir dir("syn_oracle");
  const auto cfg = small_synthetic(0.0, 10);
  const auto summary = generate_synthetic(cfg, dir.str());
  const auto book = video_codebook(cfg);
  const auto samples = Manifest::read(summary.test_manifest).load_all();
  std::vector<SamplePrediction> predictions;
  for (const auto& s : samples) {
    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < cfg.snippets; ++i) {
      const auto x = column(s.snippet_features, i);
      double err = 0.0;
      for (std::size_t c = 0; c < cfg.video_width; ++c) {
        double mean = 0.0;
        for (const auto& w : s.tokens) mean += book.data()[c * cfg.vocabulary + word_index(w)];
        err = std::max(err, std::abs(x[c] - mean / double(s.tokens.size())));
      }
      if (err < 1e-6) {
        if (!first) first = i;
        last = i;
      }
    }
    ASSERT_TRUE(first);
    predictions.push_back({s.id, {{double(*first), double(*last + 1), 1.0}}});
  }
  const auto table = recall_table(predictions, samples, {1}, {0.5, 1.0});
  EXPECT_DOUBLE_EQ(table.at(1, 0.5), 100.0);
  EXPECT_DOUBLE_EQ(table.at(1, 1.0), 100.0);
}

// ---- Checkpoints ----

ModelConfig tiny_model() {
  ModelConfig c;
  c.hidden_width = 8;
  c.scorer_hidden = 8;
  c.num_snippets = 6;
  return c;
}

struct TinyInput {
  Tensor<float> video, tokens;
  DependencyParse parse = DependencyParse::chain(3);
  TinyInput() : video(random_float({4, 6}, 11)), tokens(random_float({5, 3}, 12)) {}
};

TEST(Checkpoint, SaveLoadSaveIsIdentical) {
  TempDir dir("ckpt");
  VlgNet<float> net(tiny_model(), 4, 5);
  save_checkpoint(dir.str("a.vlgc"), net.config(), net.parameters());
  const auto loaded = load_checkpoint(dir.str("a.vlgc"));
  EXPECT_EQ(loaded.config.to_json_text(), net.config().to_json_text());
  auto cfg = loaded.config;
  cfg.seed = 99;
  VlgNet<float> fresh(cfg, 4, 5);
  apply_checkpoint(loaded, fresh.parameters());
  save_checkpoint(dir.str("b.vlgc"), net.config(), fresh.parameters());
  EXPECT_EQ(read_file_bytes(dir.str("a.vlgc")), read_file_bytes(dir.str("b.vlgc")));
}

TEST(Checkpoint, RestoredModelPredictsBitExactly) {
  VlgNet<float> net(tiny_model(), 4, 5);
  const auto checkpoint = decode_checkpoint(encode_checkpoint(net.config(), net.parameters()));
  auto cfg = tiny_model();
  cfg.seed = 1234;
  VlgNet<float> other(cfg, 4, 5);
  apply_checkpoint(checkpoint, other.parameters());
  TinyInput in;
  NoGradGuard guard;
  const auto a = net.forward(in.video, in.tokens, in.parse, 6.0);
  const auto b = other.forward(in.video, in.tokens, in.parse, 6.0);
  ASSERT_EQ(a.probabilities.size(), b.probabilities.size());
  for (std::size_t i = 0; i < a.probabilities.size(); ++i) EXPECT_EQ(a.probabilities[i], b.probabilities[i]);
}

TEST(Checkpoint, MismatchesNameTheTensor) {
  VlgNet<float> net(tiny_model(), 4, 5);
  auto checkpoint = decode_checkpoint(encode_checkpoint(net.config(), net.parameters()));
  auto missing = checkpoint;
  const std::string dropped = missing.tensors.back().name;
  missing.tensors.pop_back();
  VlgNet<float> target(tiny_model(), 4, 5);
  const auto msg = error_message([&] { apply_checkpoint(missing, target.parameters()); });
  EXPECT_NE(msg.find("missing parameter '" + dropped + "'"), std::string::npos) << msg;

  auto extra = checkpoint;
  extra.tensors.push_back({"stray", Tensor<float>::scalar(1.0f)});
  EXPECT_THROW(apply_checkpoint(extra, target.parameters()), ConfigError);

  VlgNet<float> wider(tiny_model(), 6, 5);
  EXPECT_THROW(apply_checkpoint(checkpoint, wider.parameters()), ConfigError);
}

TEST(Checkpoint, CorruptBytesAreFormatErrors) {
  VlgNet<float> net(tiny_model(), 4, 5);
  const auto good = encode_checkpoint(net.config(), net.parameters());
  EXPECT_THROW(decode_checkpoint(good.substr(0, 10)), FormatError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(good + "z"), FormatError);
  auto magic = good;
  magic[3] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  auto version = good;
  version[4] = 7;
  EXPECT_THROW(decode_checkpoint(version), FormatError);
}

// ---- Predictions ----

TEST(Predictions, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::vector<SamplePrediction> predictions;
  for (int i = 0; i < 20; ++i) {
    auto p = oracle::random_prediction(rng, 1 + i % 5);
    for (auto& m : p) m.score = std::uniform_real_distribution<double>(0, 1)(rng);  // full-precision doubles
    predictions.push_back({"s" + std::to_string(i), p});
  }
  const auto text = encode_predictions(predictions);
  const auto back = decode_predictions(text);
  ASSERT_EQ(back.size(), predictions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, predictions[i].id);
    ASSERT_EQ(back[i].moments.size(), predictions[i].moments.size());
    for (std::size_t j = 0; j < back[i].moments.size(); ++j) {
      EXPECT_EQ(back[i].moments[j].start, predictions[i].moments[j].start);
      EXPECT_EQ(back[i].moments[j].end, predictions[i].moments[j].end);
      EXPECT_EQ(back[i].moments[j].score, predictions[i].moments[j].score);
    }
  }
  EXPECT_EQ(encode_predictions(back), text);
}

TEST(Predictions, MalformedLinesAreRejected) {
  EXPECT_THROW(decode_predictions("{\"id\":\"a\"}\n"), FormatError);
  EXPECT_THROW(decode_predictions("{\"id\":\"a\",\"moments\":[[3,1,0.5]]}\n"), FormatError);
  EXPECT_THROW(decode_predictions("{\"id\":\"a\",\"moments\":[[1,2]]}\n"), FormatError);
  const auto msg = error_message([] { decode_predictions("{\"id\":\"a\",\"moments\":[]}\nnope\n"); });
  EXPECT_NE(msg.find("predictions:2:"), std::string::npos) << msg;
}

}  // namespace
}  // namespace vlg
