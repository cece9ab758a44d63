#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace abc {

/// Binary mask view: values must be 0 or 1.
struct MaskView {
  std::span<const std::uint8_t> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t truth_positives() const { return tp + fn; }      // T
  std::uint64_t predicted_positives() const { return tp + fp; }  // P

  ConfusionCounts& operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Pixel tallies. Throws std::invalid_argument on size mismatch or values
/// outside {0, 1}.
ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

/// TP / (T + P - TP); 1.0 when prediction and truth are both empty.
double iou(const ConfusionCounts& c);
/// Mean of per-sample IoU. Throws on an empty list.
double niou(std::span<const ConfusionCounts> samples);
/// 2TP / (2TP + FP + FN); 1.0 when everything is zero.
double f1(const ConfusionCounts& c);

struct MetricsReport {
  std::size_t samples = 0;
  double iou = 0.0;   // over summed pixel counts
  double niou = 0.0;  // mean of per-sample IoU
  double f1 = 0.0;    // over summed pixel counts
  std::vector<double> per_sample_iou;
};

MetricsReport summarize(std::span<const ConfusionCounts> samples);

/// p >= threshold is positive.
std::vector<std::uint8_t> binarize(std::span<const float> prob, float threshold);

/// 8-connected component labels (0 = background, 1..count), row-major
/// first-seen order.
struct ComponentLabels {
  std::vector<std::uint32_t> labels;
  std::uint32_t count = 0;
};
ComponentLabels label_components(const MaskView& mask);

/// Pd: fraction of ground-truth 8-connected components touched by at least
/// one predicted pixel (target level). Fa: false-positive pixels over all
/// pixels (pixel level).
struct RocPoint {
  double threshold = 0.0;
  double pd = 0.0;
  double fa = 0.0;
};

struct ProbabilityMap {
  std::span<const float> prob;
  std::size_t height = 0;
  std::size_t width = 0;
};

std::vector<RocPoint> roc_sweep(std::span<const ProbabilityMap> probs, std::span<const MaskView> truths,
                                std::span<const double> thresholds);

/// `count` thresholds evenly spaced over [0, 1], ascending.
std::vector<double> even_thresholds(std::size_t count);

/// "name,value" rows.
std::string format_metrics_csv(const MetricsReport& report);
/// "threshold,Pd,Fa" rows preceded by one '#' comment line naming the axis
/// conventions.
std::string format_roc_csv(std::span<const RocPoint> points);

}  // namespace abc
