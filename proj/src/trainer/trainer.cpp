#include "abc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "abc/checkpoint.hpp"
#include "abc/loss.hpp"
#include "abc/ops.hpp"
#include "abc/random.hpp"

namespace abc {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(base_lr >= 0.0f) || !std::isfinite(base_lr)) throw std::invalid_argument("learning rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(poly_power > 0.0f)) throw std::invalid_argument("poly power must be > 0");
  if (!(weight_decay >= 0.0f)) throw std::invalid_argument("weight decay must be >= 0");
  if (!(loss_eps > 0.0f)) throw std::invalid_argument("loss smoothing epsilon must be > 0");
}

std::string format_epoch_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g", r.epoch, r.mean_loss, r.lr, r.train_iou);
  return buf;
}

std::string TrainingLog::to_csv() const {
  std::string out;
  for (const auto& r : epochs) out += format_epoch_line(r) + "\n";
  return out;
}

namespace {

std::filesystem::path sibling_path(const std::filesystem::path& base, const std::string& tag) {
  std::filesystem::path out = base;
  out.replace_filename(base.stem().string() + "." + tag + base.extension().string());
  return out;
}

void require_resolution(const AbcNet& model, std::span<const Sample> dataset) {
  for (const Sample& s : dataset) {
    if (s.height != model.config().height || s.width != model.config().width) {
      throw ShapeError("resolution mismatch: sample is " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                       ", model expects " + std::to_string(model.config().height) + "x" +
                       std::to_string(model.config().width));
    }
  }
}

}  // namespace

std::vector<std::vector<float>> predict_probabilities(const AbcNet& model, std::span<const Sample> dataset,
                                                      std::size_t batch_size) {
  require_resolution(model, dataset);
  NoGradGuard no_grad;
  std::vector<std::vector<float>> out;
  const std::size_t pixels = model.config().height * model.config().width;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < std::min(dataset.size(), start + batch_size); ++i) batch.push_back(&dataset[i]);
    auto [images, masks] = make_batch(batch);
    Tensor prob = sigmoid(model.forward(images).logits);
    auto p = prob.data();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(i * pixels),
                       p.begin() + static_cast<std::ptrdiff_t>((i + 1) * pixels));
    }
  }
  return out;
}

std::vector<ConfusionCounts> evaluate_counts(const AbcNet& model, std::span<const Sample> dataset, float threshold,
                                             std::size_t batch_size) {
  const auto probs = predict_probabilities(model, dataset, batch_size);
  std::vector<ConfusionCounts> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.push_back(confusion(binarize(probs[i], threshold), dataset[i].mask));
  }
  return out;
}

TrainingLog fit(AbcNet& model, std::span<const Sample> dataset, const TrainConfig& config, AdamWState& state,
                const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
  require_resolution(model, dataset);

  ParamList params = model.parameters();
  if (state.first_moment.empty()) state = AdamWState::zeros_like(params);
  const AdamWOptions optim = config.optimizer();

  const std::size_t n = dataset.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t max_iter = static_cast<std::uint64_t>(config.epochs) * batches;
  const std::size_t first_epoch = static_cast<std::size_t>(state.step / batches);

  TrainingLog log;
  double best_iou = -1.0;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = first_epoch; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

    double loss_total = 0.0;
    EpochRecord record;
    record.epoch = epoch + 1;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const Sample*> batch;
      std::vector<std::uint8_t> flip;
      for (std::size_t i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i) {
        batch.push_back(&dataset[order[i]]);
        flip.push_back(config.horizontal_flip && rng.uniform() < 0.5 ? 1 : 0);
      }
      auto [images, masks] = make_batch(batch, flip);

      const float lr = poly_lr(config.base_lr, state.step, max_iter, config.poly_power);
      if (b == 0) record.lr = lr;

      AbcOutput out = model.forward(images);
      Tensor loss = deep_supervision_loss(out.logits, out.aux, masks, config.loss_eps);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(b + 1));
      }
      loss_total += value;
      for (auto& p : params) p.tensor.zero_grad();
      loss.backward();
      adamw_step(params, state, optim, lr);
      for (auto& p : params) p.tensor.zero_grad();
    }
    record.mean_loss = loss_total / static_cast<double>(batches);
    const auto counts = evaluate_counts(model, dataset, 0.5f, config.batch_size);
    ConfusionCounts total;
    for (const auto& c : counts) total += c;
    record.train_iou = iou(total);
    log.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (!config.checkpoint_path.empty()) {
      if (config.checkpoint_every > 0 && record.epoch % config.checkpoint_every == 0) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "epoch%04zu", record.epoch);
        save_checkpoint(model, state, sibling_path(config.checkpoint_path, tag));
      }
      if (record.train_iou > best_iou) {
        best_iou = record.train_iou;
        save_checkpoint(model, state, sibling_path(config.checkpoint_path, "best"));
      }
    }
  }
  if (!config.checkpoint_path.empty()) save_checkpoint(model, state, config.checkpoint_path);
  return log;
}

}  // namespace abc
