#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vlg/dataio.hpp"
#include "vlg/model.hpp"

namespace vlg {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double probe_recall = 0.0;  // R@1, IoU 0.5 on the held-in probe subset
  double learning_rate = 0.0;
};

struct TrainOptions {
  // Empty -> no checkpoints. The best-probe checkpoint goes to "<stem>.best<ext>".
  std::string checkpoint_path;
  std::function<void(const EpochLog&)> on_epoch;
  std::size_t threads = 1;  // probe evaluation only
};

struct TrainResult {
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double best_probe_recall = -1.0;
};

std::string best_checkpoint_path(const std::string& path);

// Adam with StepLR over shuffled samples; gradients of `batch_size` samples are
// averaged per update. A non-finite loss throws NumericalError naming the sample.
TrainResult train_model(VlgNet<float>& model, const std::vector<GroundingSample>& samples,
                        const TrainOptions& options = {});

// Inference under no-grad, fanned out over `threads` workers.
std::vector<SamplePrediction> predict_samples(const VlgNet<float>& model, const std::vector<GroundingSample>& samples,
                                              std::size_t threads = 1);

struct RecallTable {
  std::vector<std::size_t> ks;
  std::vector<double> ious;
  std::vector<std::vector<double>> values;  // [k][iou], percentages

  double at(std::size_t k, double iou) const;
  // One row per method, one column per (k, IoU) pair.
  std::string format(const std::string& method) const;
};

// Matches predictions to samples by id; a missing id counts as a miss.
RecallTable recall_table(const std::vector<SamplePrediction>& predictions, const std::vector<GroundingSample>& samples,
                         const std::vector<std::size_t>& ks, const std::vector<double>& ious);

RecallTable recall_table(const std::vector<SamplePrediction>& predictions,
                         const std::vector<std::pair<std::string, Interval>>& ground_truth,
                         const std::vector<std::size_t>& ks, const std::vector<double>& ious);

}  // namespace vlg
