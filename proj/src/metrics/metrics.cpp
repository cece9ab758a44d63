#include "abc/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace abc {

namespace {

void require_binary(std::span<const std::uint8_t> m, const char* what) {
  for (std::uint8_t v : m) {
    if (v > 1) throw std::invalid_argument(std::string(what) + " mask has a value outside {0,1}");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("confusion: prediction has " + std::to_string(pred.size()) +
                                " pixels, ground truth " + std::to_string(truth.size()));
  }
  require_binary(pred, "prediction");
  require_binary(truth, "ground-truth");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    c.tp += pred[i] & truth[i];
    c.fp += pred[i] & (1 - truth[i]);
    c.fn += (1 - pred[i]) & truth[i];
  }
  return c;
}

double iou(const ConfusionCounts& c) {
  const std::uint64_t uni = c.truth_positives() + c.predicted_positives() - c.tp;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

double niou(std::span<const ConfusionCounts> samples) {
  if (samples.empty()) throw std::invalid_argument("nIoU of an empty sample list");
  double total = 0.0;
  for (const auto& c : samples) total += iou(c);
  return total / static_cast<double>(samples.size());
}

double f1(const ConfusionCounts& c) {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

MetricsReport summarize(std::span<const ConfusionCounts> samples) {
  MetricsReport r;
  r.samples = samples.size();
  ConfusionCounts total;
  for (const auto& c : samples) {
    total += c;
    r.per_sample_iou.push_back(iou(c));
  }
  r.iou = iou(total);
  r.f1 = f1(total);
  r.niou = samples.empty() ? 0.0 : niou(samples);
  return r;
}

std::vector<std::uint8_t> binarize(std::span<const float> prob, float threshold) {
  std::vector<std::uint8_t> out(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= threshold ? 1 : 0;
  return out;
}

ComponentLabels label_components(const MaskView& mask) {
  if (mask.pixels.size() != mask.height * mask.width) {
    throw std::invalid_argument("label_components: mask size does not match its dimensions");
  }
  ComponentLabels out;
  out.labels.assign(mask.pixels.size(), 0);
  std::vector<std::size_t> stack;
  const auto h = static_cast<std::ptrdiff_t>(mask.height);
  const auto w = static_cast<std::ptrdiff_t>(mask.width);
  for (std::size_t start = 0; start < mask.pixels.size(); ++start) {
    if (!mask.pixels[start] || out.labels[start]) continue;
    const std::uint32_t label = ++out.count;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const auto y = static_cast<std::ptrdiff_t>(p) / w;
      const auto x = static_cast<std::ptrdiff_t>(p) % w;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const auto ny = y + dy;
          const auto nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const auto q = static_cast<std::size_t>(ny * w + nx);
          if (mask.pixels[q] && !out.labels[q]) {
            out.labels[q] = label;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return out;
}

std::vector<RocPoint> roc_sweep(std::span<const ProbabilityMap> probs, std::span<const MaskView> truths,
                                std::span<const double> thresholds) {
  if (probs.size() != truths.size()) throw std::invalid_argument("roc_sweep: probability/mask count mismatch");
  std::vector<ComponentLabels> components;
  std::uint64_t total_targets = 0;
  std::uint64_t total_pixels = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (probs[i].prob.size() != truths[i].pixels.size()) {
      throw std::invalid_argument("roc_sweep: probability map and mask sizes differ");
    }
    for (float p : probs[i].prob) {
      if (!(p >= 0.0f && p <= 1.0f)) throw std::invalid_argument("roc_sweep: probabilities must lie in [0,1]");
    }
    require_binary(truths[i].pixels, "ground-truth");
    components.push_back(label_components(truths[i]));
    total_targets += components.back().count;
    total_pixels += truths[i].pixels.size();
  }

  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  std::vector<std::uint8_t> hit;
  for (double t : thresholds) {
    std::uint64_t detected = 0;
    std::uint64_t false_pixels = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const auto& comp = components[i];
      hit.assign(comp.count + 1, 0);
      for (std::size_t p = 0; p < truths[i].pixels.size(); ++p) {
        if (static_cast<double>(probs[i].prob[p]) < t) continue;
        if (truths[i].pixels[p]) {
          hit[comp.labels[p]] = 1;
        } else {
          ++false_pixels;
        }
      }
      for (std::uint32_t l = 1; l <= comp.count; ++l) detected += hit[l];
    }
    RocPoint pt;
    pt.threshold = t;
    pt.pd = total_targets == 0 ? 1.0 : static_cast<double>(detected) / static_cast<double>(total_targets);
    pt.fa = total_pixels == 0 ? 0.0 : static_cast<double>(false_pixels) / static_cast<double>(total_pixels);
    out.push_back(pt);
  }
  return out;
}

std::vector<double> even_thresholds(std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

std::string format_metrics_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "N," << report.samples << '\n';
  os << "IoU," << format_double(report.iou) << '\n';
  os << "nIoU," << format_double(report.niou) << '\n';
  os << "F1," << format_double(report.f1) << '\n';
  return os.str();
}

std::string format_roc_csv(std::span<const RocPoint> points) {
  std::ostringstream os;
  os << "# threshold,Pd (target-level, 8-connected components),Fa (pixel-level false-alarm rate)\n";
  for (const auto& p : points) {
    os << format_double(p.threshold) << ',' << format_double(p.pd) << ',' << format_double(p.fa) << '\n';
  }
  return os.str();
}

}  // namespace abc
