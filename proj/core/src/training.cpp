#include "vlg/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "vlg/error.hpp"
#include "vlg/ops.hpp"
#include "vlg/optim.hpp"

namespace vlg {

std::string best_checkpoint_path(const std::string& path) {
  const std::filesystem::path p(path);
  auto best = p.parent_path() / (p.stem().string() + ".best" + p.extension().string());
  return best.string();
}

TrainResult train_model(VlgNet<float>& model, const std::vector<GroundingSample>& samples,
                        const TrainOptions& options) {
  if (samples.empty()) throw ValidationError("training set is empty");
  const auto& config = model.config();
  const std::size_t batch = config.batch_size;
  const std::size_t updates_per_epoch = (samples.size() + batch - 1) / batch;

  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  adam.decay_interval = config.lr_step_epochs * updates_per_epoch;
  adam.decay_factor = config.lr_decay;
  auto& params = model.parameters();
  Adam<float> optimizer(params, adam);

  const std::vector<GroundingSample> probe(samples.begin(),
                                           samples.begin() + static_cast<std::ptrdiff_t>(
                                                                 std::min(config.probe_size, samples.size())));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.seed ^ 0x5eedULL);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double epoch_rate = optimizer.learning_rate();
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(begin + batch, order.size());
      params.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& s = samples[order[i]];
        const auto out = model.forward(s.snippet_features, s.token_features, s.parse, s.duration);
        auto loss = model.loss(out, s.gt);
        const double value = loss.item();
        if (!std::isfinite(value)) throw NumericalError("non-finite loss on sample '" + s.id + "'");
        total += value;
        if (end - begin > 1) loss = scale(loss, 1.0f / static_cast<float>(end - begin));
        backward(loss);
      }
      optimizer.step();
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = total / static_cast<double>(samples.size());
    log.learning_rate = epoch_rate;
    if (!probe.empty()) {
      log.probe_recall = recall_table(predict_samples(model, probe, options.threads), probe, {1}, {0.5}).values[0][0];
    }
    result.history.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
    if (log.probe_recall > result.best_probe_recall) {
      result.best_probe_recall = log.probe_recall;
      result.best_epoch = epoch;
      if (!options.checkpoint_path.empty()) {
        save_checkpoint(best_checkpoint_path(options.checkpoint_path), config, params);
      }
    }
  }
  if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, config, params);
  return result;
}

std::vector<SamplePrediction> predict_samples(const VlgNet<float>& model, const std::vector<GroundingSample>& samples,
                                              std::size_t threads) {
  std::vector<SamplePrediction> out(samples.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    NoGradGuard guard;
    for (std::size_t i = first; i < samples.size(); i += stride) {
      const auto& s = samples[i];
      const auto result = model.forward(s.snippet_features, s.token_features, s.parse, s.duration);
      out[i] = {s.id, model.predict(result)};
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t, threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double RecallTable::at(std::size_t k, double iou) const {
  for (std::size_t a = 0; a < ks.size(); ++a)
    for (std::size_t b = 0; b < ious.size(); ++b)
      if (ks[a] == k && ious[b] == iou) return values[a][b];
  throw ConfigError("recall table has no entry for R@" + std::to_string(k));
}

std::string RecallTable::format(const std::string& method) const {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Method";
  for (auto k : ks)
    for (auto iou : ious) {
      std::ostringstream head;
      head << "R@" << k << " IoU=" << iou;
      out << std::right << std::setw(14) << head.str();
    }
  out << '\n' << std::left << std::setw(16) << method;
  for (const auto& row : values)
    for (double v : row) out << std::right << std::setw(14) << std::fixed << std::setprecision(2) << v;
  out << '\n';
  return out.str();
}

RecallTable recall_table(const std::vector<SamplePrediction>& predictions,
                         const std::vector<std::pair<std::string, Interval>>& ground_truth,
                         const std::vector<std::size_t>& ks, const std::vector<double>& ious) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id[p.id] = &p.moments;
  std::vector<Prediction> aligned;
  std::vector<Interval> gts;
  for (const auto& [id, gt] : ground_truth) {
    const auto it = by_id.find(id);
    aligned.push_back(it == by_id.end() ? Prediction{} : *it->second);
    gts.push_back(gt);
  }
  RecallTable table;
  table.ks = ks;
  table.ious = ious;
  for (auto k : ks) {
    std::vector<double> row;
    for (auto iou : ious) row.push_back(recall_at_k_iou(aligned, gts, k, iou));
    table.values.push_back(std::move(row));
  }
  return table;
}

RecallTable recall_table(const std::vector<SamplePrediction>& predictions, const std::vector<GroundingSample>& samples,
                         const std::vector<std::size_t>& ks, const std::vector<double>& ious) {
  std::vector<std::pair<std::string, Interval>> gts;
  for (const auto& s : samples) gts.emplace_back(s.id, s.gt);
  return recall_table(predictions, gts, ks, ious);
}

}  // namespace vlg
