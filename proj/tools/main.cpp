// vlg: data generation, training, evaluation and verification front end.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or config error,
// 3 I/O error.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "vlg/dataio.hpp"
#include "vlg/error.hpp"
#include "vlg/gradcheck_suite.hpp"
#include "vlg/model.hpp"
#include "vlg/training.hpp"

namespace {

using namespace vlg;

constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int verbosity = 1;

void log(const std::string& line) {
  if (verbosity > 0) std::cerr << line << '\n';
}

std::optional<std::uint64_t> seed_override(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("VLG_SEED")) {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used == std::string(env).size()) return value;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("VLG_SEED must be a non-negative integer, got '") + env + "'");
  }
  return std::nullopt;
}

std::string read_text(const std::string& path) { return read_file_bytes(path); }

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- gen-data ----

struct GenDataArgs {
  std::string out;
  std::string config;
  std::optional<std::size_t> num_videos, num_test_videos, snippets, video_width, token_width, vocabulary, min_length,
      max_length;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
};

int cmd_gen_data(const GenDataArgs& a) {
  SyntheticConfig cfg = a.config.empty() ? SyntheticConfig{} : SyntheticConfig::from_json_text(read_text(a.config));
  if (a.num_videos) cfg.num_videos = *a.num_videos;
  if (a.num_test_videos) cfg.num_test_videos = *a.num_test_videos;
  if (a.snippets) cfg.snippets = *a.snippets;
  if (a.video_width) cfg.video_width = *a.video_width;
  if (a.token_width) cfg.token_width = *a.token_width;
  if (a.vocabulary) cfg.vocabulary = *a.vocabulary;
  if (a.min_length) cfg.min_length = *a.min_length;
  if (a.max_length) cfg.max_length = *a.max_length;
  if (a.noise) cfg.noise = *a.noise;
  if (auto seed = seed_override(a.seed)) cfg.seed = *seed;
  const auto summary = generate_synthetic(cfg, a.out);
  std::cout << "videos: " << summary.train_videos + summary.test_videos << " (train " << summary.train_videos
            << ", test " << summary.test_videos << ")\n";
  std::cout << "manifests: " << summary.train_manifest << ", " << summary.test_manifest << '\n';
  std::cout << "planted moment lengths (snippets: count):\n";
  for (const auto& [length, count] : summary.length_histogram) {
    std::cout << "  " << std::setw(3) << length << ": " << count << '\n';
  }
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string profile;
  std::string manifest;
  std::string out;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

ModelConfig load_config(const std::string& path, const std::string& profile) {
  if (!path.empty() && !profile.empty()) throw ConfigError("use either --config or --profile, not both");
  if (!path.empty()) return ModelConfig::from_file(path);
  return ModelConfig::for_profile(profile.empty() ? "synthetic" : profile);
}

int cmd_train(const TrainArgs& a) {
  auto config = load_config(a.config, a.profile);
  if (a.epochs) config.epochs = *a.epochs;
  if (auto seed = seed_override(a.seed)) config.seed = *seed;
  config.validate();
  const auto manifest = Manifest::read(a.manifest);
  const auto samples = manifest.load_all();
  if (samples.empty()) throw ValidationError(a.manifest + ": manifest has no records");
  VlgNet<float> model(config, manifest.video_width(), manifest.token_width());
  log("parameters: " + std::to_string(model.parameters().scalar_count()) + " scalars in " +
      std::to_string(model.parameters().size()) + " tensors; " + std::to_string(samples.size()) + " samples");

  TrainOptions options;
  options.checkpoint_path = a.out;
  options.threads = a.threads ? a.threads : default_threads();
  options.on_epoch = [](const EpochLog& e) {
    std::ostringstream line;
    line << "epoch " << e.epoch << "  loss " << std::fixed << std::setprecision(6) << e.mean_loss << "  probe R@1 IoU0.5 "
         << std::setprecision(2) << e.probe_recall << "  lr " << std::scientific << std::setprecision(2)
         << e.learning_rate;
    log(line.str());
  };
  const auto result = train_model(model, samples, options);
  std::cout << "best probe R@1 IoU0.5 " << std::fixed << std::setprecision(2) << result.best_probe_recall
            << " at epoch " << result.best_epoch << "\n";
  std::cout << "checkpoint: " << a.out << " (best: " << best_checkpoint_path(a.out) << ")\n";
  return 0;
}

// ---- shared model loading ----

struct LoadedModel {
  Checkpoint checkpoint;
  std::unique_ptr<VlgNet<float>> net;
};

LoadedModel load_model(const std::string& path, const Manifest& manifest) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  const auto& cfg = m.checkpoint.config;
  if (cfg.video_feature_width != manifest.video_width() || cfg.token_feature_width != manifest.token_width()) {
    throw ConfigError("checkpoint expects feature widths (" + std::to_string(cfg.video_feature_width) + ", " +
                      std::to_string(cfg.token_feature_width) + "), manifest has (" +
                      std::to_string(manifest.video_width()) + ", " + std::to_string(manifest.token_width()) + ")");
  }
  m.net = std::make_unique<VlgNet<float>>(cfg, cfg.video_feature_width, cfg.token_feature_width);
  apply_checkpoint(m.checkpoint, m.net->parameters());
  return m;
}

template <typename V>
std::vector<V> parse_list(const std::string& text, const char* flag) {
  std::vector<V> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream parse(item);
    V value{};
    if (!(parse >> value) || !(parse >> std::ws).eof()) {
      throw ConfigError(std::string("--") + flag + ": cannot parse '" + item + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) throw ConfigError(std::string("--") + flag + " must not be empty");
  return out;
}

// ---- eval ----

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string predictions;
  std::string recall = "1,5";
  std::string iou;
  std::optional<double> nms;
  std::string out;
  std::string method = "VLG-Net";
  std::size_t threads = 0;
};

int cmd_eval(const EvalArgs& a) {
  if (a.model.empty() == a.predictions.empty()) throw ConfigError("eval needs exactly one of --model or --predictions");
  const auto manifest = Manifest::read(a.manifest);
  std::vector<std::pair<std::string, Interval>> gts;
  for (const auto& r : manifest.records()) gts.emplace_back(r.id, r.gt);
  auto ks = parse_list<std::size_t>(a.recall, "recall");

  std::vector<SamplePrediction> predictions;
  std::vector<double> ious;
  if (!a.predictions.empty()) {
    predictions = read_predictions(a.predictions);
    if (a.nms) {
      for (auto& p : predictions) p.moments = nms(p.moments, *a.nms);
    }
    ious = parse_list<double>(a.iou.empty() ? "0.3,0.5,0.7" : a.iou, "iou");
  } else {
    auto loaded = load_model(a.model, manifest);
    auto config = loaded.checkpoint.config;
    if (a.nms) {
      config.nms_threshold = *a.nms;
      config.validate();
      auto net = std::make_unique<VlgNet<float>>(config, config.video_feature_width, config.token_feature_width);
      apply_checkpoint(loaded.checkpoint, net->parameters());
      loaded.net = std::move(net);
    }
    ious = a.iou.empty() ? config.recall_iou : parse_list<double>(a.iou, "iou");
    predictions = predict_samples(*loaded.net, manifest.load_all(), a.threads ? a.threads : default_threads());
  }
  for (double t : ious) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("--iou values must lie in (0, 1]");
  }
  const auto table = recall_table(predictions, gts, ks, ious);
  std::cout << table.format(a.method);
  if (!a.out.empty()) write_predictions(a.out, predictions);
  return 0;
}

// ---- infer ----

struct InferArgs {
  std::string model;
  std::string manifest;
  std::string id;
  std::string out;
  std::size_t top = 5;
  std::size_t threads = 0;
};

int cmd_infer(const InferArgs& a) {
  const auto manifest = Manifest::read(a.manifest);
  auto loaded = load_model(a.model, manifest);
  std::vector<GroundingSample> samples;
  if (!a.id.empty()) {
    const auto index = manifest.find(a.id);
    if (!index) throw ConfigError("unknown sample id '" + a.id + "'");
    samples.push_back(manifest.load(*index));
  } else {
    samples = manifest.load_all();
  }
  const auto predictions = predict_samples(*loaded.net, samples, a.threads ? a.threads : default_threads());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::cout << predictions[i].id << "  \"";
    for (std::size_t t = 0; t < samples[i].tokens.size(); ++t) std::cout << (t ? " " : "") << samples[i].tokens[t];
    std::cout << "\"\n";
    for (std::size_t r = 0; r < std::min(a.top, predictions[i].moments.size()); ++r) {
      const auto& m = predictions[i].moments[r];
      std::cout << "  " << r + 1 << ". [" << std::fixed << std::setprecision(2) << m.start << ", " << m.end
                << "] score " << std::setprecision(4) << m.score << '\n';
    }
  }
  if (!a.out.empty()) write_predictions(a.out, predictions);
  return 0;
}

// ---- gradcheck ----

struct GradcheckArgs {
  std::string module;
  std::size_t seeds = 10;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  SuiteOptions options;
  options.module = a.module;
  options.seeds = a.seeds;
  options.inject_fault = a.inject_fault;
  const auto results = run_gradcheck_suite(options);
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(16) << r.module << std::setw(28) << r.op
              << " max rel err " << std::scientific << std::setprecision(3) << r.worst.max_relative_error << std::defaultfloat;
    if (!r.passed) std::cout << "  seed " << r.worst_seed << ": " << r.worst.message;
    std::cout << '\n';
    all = all && r.passed;
  }
  std::cout << (all ? "all gradient checks passed" : "gradient check FAILED") << '\n';
  return all ? 0 : kExitVerification;
}

// ---- dump-attention ----

struct DumpArgs {
  std::string model;
  std::string manifest;
  std::string id;
  std::string out;
};

std::string sibling_path(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& tokens,
                      const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  out << "token";
  for (std::size_t i = 0; i < (rows.empty() ? 0 : rows[0].size()); ++i) out << ',' << i;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << tokens[r];
    for (double v : rows[r]) out << ',' << v;
    out << '\n';
  }
  write_file_bytes(path, out.str());
}

int cmd_dump_attention(const DumpArgs& a) {
  const auto manifest = Manifest::read(a.manifest);
  const auto index = manifest.find(a.id);
  if (!index) throw ConfigError("unknown sample id '" + a.id + "'");
  auto loaded = load_model(a.model, manifest);
  if (loaded.checkpoint.config.fusion != FusionMode::kGraphMatch || !loaded.checkpoint.config.edges.matching) {
    throw ConfigError("dump-attention needs a graph_match model with matching edges");
  }
  const auto sample = manifest.load(*index);
  NoGradGuard guard;
  const auto out = loaded.net->forward(sample.snippet_features, sample.token_features, sample.parse, sample.duration);
  write_matrix_csv(a.out, sample.tokens, token_snippet_matrix(*out.graph, *out.scalars, false));
  const auto pre = sibling_path(a.out, "_pre_softmax");
  write_matrix_csv(pre, sample.tokens, token_snippet_matrix(*out.graph, *out.scalars, true));
  std::cout << "wrote " << a.out << " and " << pre << " (" << sample.tokens.size() << " x "
            << sample.snippet_features.dim(1) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-language graph matching for temporal grounding"};
  app.require_subcommand(1);
  int quiet = 0;
  app.add_flag("-q,--quiet", quiet, "Suppress progress logs on stderr");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic grounding dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config, "JSON file with generator settings");
  gen_cmd->add_option("--num-videos", gen.num_videos, "Training videos");
  gen_cmd->add_option("--num-test-videos", gen.num_test_videos, "Test videos (default num-videos / 4)");
  gen_cmd->add_option("--snippets", gen.snippets, "Snippets per video");
  gen_cmd->add_option("--video-width", gen.video_width, "Snippet feature width");
  gen_cmd->add_option("--token-width", gen.token_width, "Token feature width");
  gen_cmd->add_option("--vocabulary", gen.vocabulary, "Codebook size");
  gen_cmd->add_option("--min-length", gen.min_length, "Shortest planted moment (snippets)");
  gen_cmd->add_option("--max-length", gen.max_length, "Longest planted moment (snippets)");
  gen_cmd->add_option("--noise", gen.noise, "Noise level");
  gen_cmd->add_option("--seed", gen.seed, "Random seed (falls back to VLG_SEED)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train.config, "JSON model config");
  train_cmd->add_option("--profile", train.profile, "Named profile when no config file is given");
  train_cmd->add_option("--manifest", train.manifest, "Training manifest")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train.epochs, "Override the epoch count");
  train_cmd->add_option("--seed", train.seed, "Random seed (falls back to VLG_SEED)");
  train_cmd->add_option("--threads", train.threads, "Probe evaluation threads");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate recall on a manifest");
  eval_cmd->add_option("--model", eval.model, "Checkpoint");
  eval_cmd->add_option("--predictions", eval.predictions, "Score an existing prediction file instead of a model");
  eval_cmd->add_option("--manifest", eval.manifest, "Evaluation manifest")->required();
  eval_cmd->add_option("--recall", eval.recall, "Comma-separated k values");
  eval_cmd->add_option("--iou", eval.iou, "Comma-separated IoU thresholds");
  eval_cmd->add_option("--nms", eval.nms, "NMS threshold override");
  eval_cmd->add_option("--out", eval.out, "Write predictions as JSON lines");
  eval_cmd->add_option("--method", eval.method, "Row label in the table");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Print ranked moments");
  infer_cmd->add_option("--model", infer.model, "Checkpoint")->required();
  infer_cmd->add_option("--manifest", infer.manifest, "Manifest")->required();
  infer_cmd->add_option("--id", infer.id, "Restrict to one sample");
  infer_cmd->add_option("--top", infer.top, "Moments to print per sample");
  infer_cmd->add_option("--out", infer.out, "Write predictions as JSON lines");
  infer_cmd->add_option("--threads", infer.threads, "Worker threads");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--module", grad.module, "Restrict to one module");
  grad_cmd->add_option("--seeds", grad.seeds, "Random instances per operation");
  grad_cmd->add_flag("--inject-fault", grad.inject_fault, "Add an operation with a deliberately wrong gradient");

  DumpArgs dump;
  auto* dump_cmd = app.add_subcommand("dump-attention", "Write matching-edge weights as CSV");
  dump_cmd->add_option("--model", dump.model, "Checkpoint")->required();
  dump_cmd->add_option("--manifest", dump.manifest, "Manifest")->required();
  dump_cmd->add_option("--id", dump.id, "Sample id")->required();
  dump_cmd->add_option("--out", dump.out, "CSV path for softmax weights")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  verbosity = quiet ? 0 : 1;

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*infer_cmd) return cmd_infer(infer);
    if (*grad_cmd) return cmd_gradcheck(grad);
    if (*dump_cmd) return cmd_dump_attention(dump);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitVerification;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const PathError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
