#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "test_support.hpp"
#include "vlg/config.hpp"
#include "vlg/dataio.hpp"
#include "vlg/error.hpp"
#include "vlg/gradcheck_suite.hpp"
#include "vlg/model.hpp"
#include "vlg/training.hpp"

namespace vlg {
namespace {

using testing::TempDir;

// ---- Config ----

TEST(Config, PublishedProfiles) {
  const auto anet = ModelConfig::for_profile("activitynet");
  EXPECT_EQ(anet.num_snippets, 64u);
  EXPECT_EQ(anet.video_blocks, 1u);
  EXPECT_EQ(anet.lstm_layers, 3u);
  EXPECT_EQ(anet.syntac_layers, 4u);
  EXPECT_DOUBLE_EQ(anet.nms_threshold, 0.5);
  EXPECT_DOUBLE_EQ(anet.loss.low, 0.7);
  EXPECT_DOUBLE_EQ(anet.loss.high, 0.71);

  const auto tacos = ModelConfig::for_profile("tacos");
  EXPECT_EQ(tacos.num_snippets, 256u);
  EXPECT_EQ(tacos.video_blocks, 4u);
  EXPECT_EQ(tacos.lstm_layers, 5u);
  EXPECT_EQ(tacos.syntac_layers, 2u);
  EXPECT_DOUBLE_EQ(tacos.nms_threshold, 0.3);
  EXPECT_DOUBLE_EQ(tacos.loss.low, 0.5);
  EXPECT_DOUBLE_EQ(tacos.loss.high, 0.7);

  const auto didemo = ModelConfig::for_profile("didemo");
  EXPECT_EQ(didemo.num_snippets, 48u);
  EXPECT_EQ(didemo.video_blocks, 2u);
  EXPECT_EQ(didemo.lstm_layers, 3u);
  EXPECT_EQ(didemo.syntac_layers, 4u);
  EXPECT_DOUBLE_EQ(didemo.nms_threshold, 0.5);
  EXPECT_DOUBLE_EQ(didemo.loss.low, 0.69);
  EXPECT_DOUBLE_EQ(didemo.loss.high, 1.0);

  for (const auto& name : {"activitynet", "tacos", "didemo"}) {
    const auto c = ModelConfig::for_profile(name);
    EXPECT_EQ(c.hidden_width, 512u) << name;
    EXPECT_TRUE(c.input_positional_encoding) << name;
  }
  EXPECT_THROW(ModelConfig::for_profile("kinetics"), ConfigError);
}

TEST(Config, SyntheticDefaults) {
  const ModelConfig c = ModelConfig::for_profile("synthetic");
  EXPECT_EQ(c.hidden_width, 32u);
  EXPECT_EQ(c.num_snippets, 16u);
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_FALSE(c.input_positional_encoding);
  EXPECT_EQ(c.to_json_text(), ModelConfig{}.to_json_text());
}

TEST(Config, JsonRoundTripForEveryProfile) {
  for (const auto& name : ModelConfig::profile_names()) {
    const auto c = ModelConfig::for_profile(name);
    const auto text = c.to_json_text();
    EXPECT_EQ(ModelConfig::from_json_text(text).to_json_text(), text) << name;
  }
}

TEST(Config, OverridesApplyOnTopOfTheProfile) {
  const auto c = ModelConfig::from_json_text(
      R"({"profile":"tacos","knn_k":5,"edges":{"matching":false},"pooling":"cross","sampling":{"dense_limit":64,"schedule":[[128,2],[256,4]]}})");
  EXPECT_EQ(c.num_snippets, 256u);
  EXPECT_EQ(c.knn_k, 5u);
  EXPECT_FALSE(c.edges.matching);
  EXPECT_TRUE(c.edges.ordering);
  EXPECT_EQ(c.pooling, PoolingVariant::kCross);
  EXPECT_EQ(c.sampling.schedule.size(), 2u);
}

TEST(Config, BadInputsAreConfigErrors) {
  for (const auto* text : {
           R"({"bogus": 1})",
           R"({"knn_k": "three"})",
           R"({"knn_k": 0})",
           R"({"hidden_width": 31})",
           R"({"nms_threshold": 0})",
           R"({"nms_threshold": 1.5})",
           R"({"iou_thresholds": [0.8, 0.6]})",
           R"({"edges": {"diagonal": true}})",
           R"({"pooling": "max"})",
           R"({"fusion": "sum"})",
           R"({"sampling": {"dense_limit": 2, "schedule": [[8, 2]]}})",
           R"({"learning_rate": -1})",
           "{not json",
       }) {
    EXPECT_THROW(ModelConfig::from_json_text(text), ConfigError) << text;
  }
  EXPECT_THROW(ModelConfig::from_file("/nonexistent/config.json"), PathError);
}

// ---- Model ----

ModelConfig small_config() {
  ModelConfig c;
  c.hidden_width = 8;
  c.scorer_hidden = 8;
  c.num_snippets = 8;
  return c;
}

struct Inputs {
  Tensor<float> video, tokens;
  DependencyParse parse = DependencyParse::chain(4);
  explicit Inputs(std::uint64_t seed, std::size_t n_v = 8) {
    std::mt19937_64 g(seed);
    video = testing::random_tensor<float>({6, n_v}, g);
    tokens = testing::random_tensor<float>({5, 4}, g);
  }
};

TEST(Model, ForwardShapesAndNormalization) {
  VlgNet<float> net(small_config(), 6, 5);
  Inputs in(1);
  NoGradGuard guard;
  const auto out = net.forward(in.video, in.tokens, in.parse, 16.0);
  const std::size_t m = out.candidates.size();
  EXPECT_EQ(out.logits.shape(), (Shape{1, m}));
  ASSERT_EQ(out.probabilities.size(), m);
  for (double p : out.probabilities) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_EQ(out.pooling_weights.shape(), (Shape{8, m}));
  for (std::size_t k = 0; k < m; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < 8; ++i) total += out.pooling_weights.at(i, k);
    EXPECT_NEAR(total, 1.0, 1e-5);
  }
  double q = 0.0;
  for (float v : out.query_weights.data()) q += v;
  EXPECT_NEAR(q, 1.0, 1e-5);
  ASSERT_TRUE(out.graph);
  ASSERT_TRUE(out.scalars);
}

TEST(Model, OtherLengthsUseTheDefaultSchedule) {
  VlgNet<float> net(small_config(), 6, 5);
  Inputs in(2, 12);
  NoGradGuard guard;
  const auto out = net.forward(in.video, in.tokens, in.parse, 24.0);
  EXPECT_EQ(out.candidates.size(), enumerate_candidates(12, 24.0, SamplingConfig::default_for(12)).size());
}

TEST(Model, WrongWidthsAreDimensionErrors) {
  VlgNet<float> net(small_config(), 6, 5);
  Inputs in(3);
  EXPECT_THROW(net.forward(Tensor<float>::zeros({7, 8}), in.tokens, in.parse, 8.0), DimensionError);
  EXPECT_THROW(net.forward(in.video, Tensor<float>::zeros({4, 4}), in.parse, 8.0), DimensionError);
}

TEST(Model, InitializationFollowsTheSeed) {
  VlgNet<float> a(small_config(), 6, 5), b(small_config(), 6, 5);
  auto other = small_config();
  other.seed = 8;
  VlgNet<float> c(other, 6, 5);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters().entries()[i].tensor.to_vector(), b.parameters().entries()[i].tensor.to_vector());
    differs = differs ||
              a.parameters().entries()[i].tensor.to_vector() != c.parameters().entries()[i].tensor.to_vector();
  }
  EXPECT_TRUE(differs);
}

TEST(Model, EveryParameterReceivesAGradient) {
  VlgNet<float> net(small_config(), 6, 5);
  Inputs in(4);
  const auto out = net.forward(in.video, in.tokens, in.parse, 8.0);
  backward(net.loss(out, {2.0, 5.0}));
  for (const auto& e : net.parameters().entries()) {
    ASSERT_TRUE(e.tensor.has_grad()) << e.name;
    ASSERT_EQ(e.tensor.grad().size(), e.tensor.numel()) << e.name;
    // A two-unit bottleneck path can be dead on a single sample.
    if (e.name.find(".path") != std::string::npos) continue;
    double norm = 0.0;
    for (float g : e.tensor.grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0) << e.name;
  }
}

TEST(Model, FullNetworkGradientInDoublePrecision) {
  auto cfg = small_config();
  cfg.hidden_width = 4;
  cfg.scorer_hidden = 4;
  cfg.cardinality = 2;
  cfg.num_snippets = 4;
  VlgNet<double> net(cfg, 4, 3);
  std::mt19937_64 g(5);
  const auto video = testing::random_tensor({4, 4}, g);
  const auto tokens = testing::random_tensor({3, 2}, g);
  const auto parse = DependencyParse::chain(2);
  // Edges are rebuilt from the features, so perturbations stay small enough
  // not to flip a k-NN choice.
  std::vector<Tensor<double>> inputs;
  for (const auto& e : net.parameters().entries()) {
    // Zero biases would sit exactly on relu kinks.
    auto t = e.tensor;
    for (auto& v : t.mutable_data()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(g);
    inputs.push_back(t);
  }
  const auto report = grad_check(
      [&] { return net.loss(net.forward(video, tokens, parse, 4.0), {1.0, 3.0}); }, inputs);
  EXPECT_TRUE(report.passed) << report.message;
}

TEST(Model, PredictionsAreRankedAndSuppressed) {
  VlgNet<float> net(small_config(), 6, 5);
  Inputs in(6);
  NoGradGuard guard;
  const auto pred = net.predict(net.forward(in.video, in.tokens, in.parse, 8.0));
  ASSERT_FALSE(pred.empty());
  for (std::size_t i = 1; i < pred.size(); ++i) EXPECT_GE(pred[i - 1].score, pred[i].score);
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = i + 1; j < pred.size(); ++j)
      EXPECT_LT(temporal_iou({pred[i].start, pred[i].end}, {pred[j].start, pred[j].end}), 0.5);
}

TEST(Model, AlternativeFusionModes) {
  for (const auto mode : {FusionMode::kHadamard, FusionMode::kConcat}) {
    auto cfg = small_config();
    cfg.fusion = mode;
    VlgNet<float> net(cfg, 6, 5);
    Inputs in(7);
    const auto out = net.forward(in.video, in.tokens, in.parse, 8.0);
    EXPECT_FALSE(out.graph);
    backward(net.loss(out, {0.0, 4.0}));
    EXPECT_FALSE(net.parameters().contains("fusion0.matching.weight"));
  }
}

TEST(Model, DisabledMatchingEdgesLeaveNoCrossEdges) {
  auto cfg = small_config();
  cfg.edges.matching = false;
  VlgNet<float> net(cfg, 6, 5);
  Inputs in(8);
  NoGradGuard guard;
  const auto out = net.forward(in.video, in.tokens, in.parse, 8.0);
  ASSERT_TRUE(out.graph);
  EXPECT_TRUE(out.graph->matching.empty());
}

// ---- Training ----

struct TinyData {
  TempDir dir{"train"};
  std::vector<GroundingSample> train, test;
  explicit TinyData(double noise = 0.0) {
    SyntheticConfig s;
    s.num_videos = 16;
    s.num_test_videos = 8;
    s.snippets = 8;
    s.video_width = 8;
    s.token_width = 8;
    s.vocabulary = 6;
    s.min_length = 2;
    s.max_length = 4;
    s.noise = noise;
    const auto summary = generate_synthetic(s, dir.str());
    train = Manifest::read(summary.train_manifest).load_all();
    test = Manifest::read(summary.test_manifest).load_all();
  }
};

ModelConfig tiny_training_config(std::size_t epochs) {
  auto c = small_config();
  c.epochs = epochs;
  c.probe_size = 8;
  return c;
}

TEST(Training, LossFallsOnNoiselessData) {
  TinyData data;
  VlgNet<float> net(tiny_training_config(5), 8, 8);
  const auto result = train_model(net, data.train);
  ASSERT_EQ(result.history.size(), 5u);
  EXPECT_LT(result.history.back().mean_loss, result.history.front().mean_loss);
  for (std::size_t e = 0; e < 5; ++e) EXPECT_EQ(result.history[e].epoch, e + 1);
  EXPECT_GE(result.best_epoch, 1u);
}

TEST(Training, RunsAreDeterministic) {
  TinyData data(0.05);
  std::vector<std::vector<double>> losses;
  std::vector<std::vector<float>> finals;
  for (int run = 0; run < 2; ++run) {
    VlgNet<float> net(tiny_training_config(2), 8, 8);
    const auto result = train_model(net, data.train);
    losses.emplace_back();
    for (const auto& e : result.history) losses.back().push_back(e.mean_loss);
    finals.push_back(net.parameters().entries().front().tensor.to_vector());
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(finals[0], finals[1]);
}

TEST(Training, StepScheduleHalvesTheRate) {
  TinyData data;
  auto cfg = tiny_training_config(4);
  cfg.lr_step_epochs = 2;
  VlgNet<float> net(cfg, 8, 8);
  const auto result = train_model(net, data.train);
  EXPECT_DOUBLE_EQ(result.history[0].learning_rate, cfg.learning_rate);
  EXPECT_DOUBLE_EQ(result.history[1].learning_rate, cfg.learning_rate);
  EXPECT_DOUBLE_EQ(result.history[2].learning_rate, cfg.learning_rate * 0.5);
  EXPECT_DOUBLE_EQ(result.history[3].learning_rate, cfg.learning_rate * 0.5);
}

TEST(Training, WritesLastAndBestCheckpoints) {
  TinyData data;
  VlgNet<float> net(tiny_training_config(2), 8, 8);
  TrainOptions options;
  options.checkpoint_path = data.dir.str("model.vlgc");
  std::size_t calls = 0;
  options.on_epoch = [&](const EpochLog&) { ++calls; };
  train_model(net, data.train, options);
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(best_checkpoint_path(options.checkpoint_path), data.dir.str("model.best.vlgc"));
  EXPECT_TRUE(std::filesystem::exists(options.checkpoint_path));
  EXPECT_TRUE(std::filesystem::exists(best_checkpoint_path(options.checkpoint_path)));
  const auto loaded = load_checkpoint(options.checkpoint_path);
  EXPECT_EQ(loaded.config.video_feature_width, 8u);
  EXPECT_EQ(encode_checkpoint(loaded.config, net.parameters()), read_file_bytes(options.checkpoint_path));
}

TEST(Training, ThreadCountDoesNotChangePredictions) {
  TinyData data(0.05);
  VlgNet<float> net(tiny_training_config(1), 8, 8);
  const auto one = predict_samples(net, data.test, 1);
  const auto three = predict_samples(net, data.test, 3);
  EXPECT_EQ(encode_predictions(one), encode_predictions(three));
}

TEST(RecallTable, MissingIdsCountAsMisses) {
  const std::vector<std::pair<std::string, Interval>> gt{{"a", {0, 2}}, {"b", {4, 6}}};
  const std::vector<SamplePrediction> preds{{"a", {{0, 2, 0.9}}}};
  const auto table = recall_table(preds, gt, {1, 5}, {0.5});
  EXPECT_DOUBLE_EQ(table.at(1, 0.5), 50.0);
  EXPECT_DOUBLE_EQ(table.at(5, 0.5), 50.0);
  EXPECT_THROW(table.at(2, 0.5), ConfigError);
  const auto text = table.format("Oracle");
  EXPECT_NE(text.find("R@1 IoU=0.5"), std::string::npos);
  EXPECT_NE(text.find("Oracle"), std::string::npos);
  EXPECT_NE(text.find("50.00"), std::string::npos);
}

// ---- Gradient-check suite ----

TEST(GradcheckSuite, EveryOperationPasses) {
  SuiteOptions options;
  const auto results = run_gradcheck_suite(options);
  std::set<std::string> modules;
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.module << "/" << r.op << ": " << r.worst.message;
    EXPECT_GE(r.seeds, 10u);
    EXPECT_LT(r.worst.max_relative_error, 1e-4);
    modules.insert(r.module);
  }
  for (const auto& m : gradcheck_modules()) EXPECT_TRUE(modules.count(m)) << m;
}

TEST(GradcheckSuite, InjectedFaultIsCaught) {
  SuiteOptions options;
  options.module = "tensor";
  options.seeds = 2;
  options.inject_fault = true;
  const auto results = run_gradcheck_suite(options);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  EXPECT_EQ(failed, 1u);
  options.module = "nonsense";
  EXPECT_THROW(run_gradcheck_suite(options), ConfigError);
}

}  // namespace
}  // namespace vlg
