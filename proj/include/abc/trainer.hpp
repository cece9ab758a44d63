#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "abc/data.hpp"
#include "abc/metrics.hpp"
#include "abc/network.hpp"
#include "abc/optim.hpp"

namespace abc {

struct TrainConfig {
  std::size_t epochs = 1;
  float base_lr = 3e-4f;
  std::size_t batch_size = 4;
  float poly_power = 0.9f;
  float weight_decay = 0.01f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 0;
  float loss_eps = 1.0f;
  bool horizontal_flip = false;
  /// Empty disables checkpointing. Otherwise the final state is written
  /// here, plus <stem>.epochNNNN<ext> every `checkpoint_every` epochs and
  /// <stem>.best<ext> whenever train IoU improves.
  std::filesystem::path checkpoint_path;
  std::size_t checkpoint_every = 50;

  void validate() const;
  AdamWOptions optimizer() const { return {beta1, beta2, adam_eps, weight_decay}; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // learning rate of the epoch's first step
  double train_iou = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  /// One "epoch,mean_loss,lr,train_IoU" line per epoch, no header.
  std::string to_csv() const;
};

std::string format_epoch_line(const EpochRecord& record);

/// Raised when the loss stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the soft-IoU / AdamW / poly-decay loop. Continues from `state.step`
/// (so a restored optimizer resumes its schedule). Deterministic in
/// `config.seed`.
TrainingLog fit(AbcNet& model, std::span<const Sample> dataset, const TrainConfig& config, AdamWState& state,
                const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Sigmoid probabilities per sample, evaluated without recording a graph.
std::vector<std::vector<float>> predict_probabilities(const AbcNet& model, std::span<const Sample> dataset,
                                                      std::size_t batch_size = 4);

/// Confusion counts of thresholded predictions (p >= threshold) per sample.
std::vector<ConfusionCounts> evaluate_counts(const AbcNet& model, std::span<const Sample> dataset,
                                             float threshold = 0.5f, std::size_t batch_size = 4);

}  // namespace abc
