#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "abc/data.hpp"
#include "abc/random.hpp"

namespace abc {

namespace {

constexpr double kMaxTargetFraction = 0.01;
constexpr int kPlacementAttempts = 200;

struct Bump {
  double cy, cx, sigma, amplitude;
};

double half_peak_radius_sq(double radius) {
  const double sigma = radius / 2.0;
  return 2.0 * sigma * sigma * std::log(2.0);
}

std::size_t half_peak_area(double radius) {
  const double limit = half_peak_radius_sq(radius);
  const auto reach = static_cast<long>(std::ceil(radius));
  std::size_t n = 0;
  for (long dy = -reach; dy <= reach; ++dy)
    for (long dx = -reach; dx <= reach; ++dx)
      if (static_cast<double>(dy * dy + dx * dx) <= limit) ++n;
  return n;
}

}  // namespace

std::string to_string(BackgroundStyle style) {
  return style == BackgroundStyle::smooth_gradient ? "smooth_gradient" : "cloud_clutter";
}

BackgroundStyle parse_background_style(const std::string& s) {
  if (s == "smooth_gradient") return BackgroundStyle::smooth_gradient;
  if (s == "cloud_clutter") return BackgroundStyle::cloud_clutter;
  throw std::invalid_argument("background must be smooth_gradient or cloud_clutter, got '" + s + "'");
}

void SceneSpec::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("scene resolution must be at least 8x8");
  if (min_targets > max_targets) throw std::invalid_argument("min_targets exceeds max_targets");
  if (!(min_radius >= 1.0 && max_radius <= 4.0 && min_radius <= max_radius)) {
    throw std::invalid_argument("target radius range must lie within [1, 4] pixels");
  }
  if (!(min_peak > 0.0 && min_peak <= max_peak && max_peak <= 1.0)) {
    throw std::invalid_argument("target peak range must lie within (0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
  const double area = static_cast<double>(height * width);
  if (max_targets > 0 && static_cast<double>(half_peak_area(min_radius)) >= kMaxTargetFraction * area) {
    throw std::invalid_argument("even the smallest target covers 1% of the image; enlarge the resolution");
  }
}

Sample generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  Sample s;
  s.height = spec.height;
  s.width = spec.width;
  s.seed = mix_seed(spec.seed, index);
  Rng rng(s.seed);
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  const double extent = static_cast<double>(std::max(h, w));

  // Low-frequency background.
  std::vector<Bump> bumps;
  const double base = rng.uniform(0.1, 0.3);
  double gy = 0.0;
  double gx = 0.0;
  if (spec.background == BackgroundStyle::smooth_gradient) {
    gy = rng.uniform(-0.1, 0.1);
    gx = rng.uniform(-0.1, 0.1);
    for (int i = 0; i < 3; ++i) {
      bumps.push_back({rng.uniform(0, static_cast<double>(h)), rng.uniform(0, static_cast<double>(w)),
                       rng.uniform(extent / 4, extent / 2), rng.uniform(-0.1, 0.1)});
    }
  } else {
    for (int i = 0; i < 8; ++i) {
      bumps.push_back({rng.uniform(0, static_cast<double>(h)), rng.uniform(0, static_cast<double>(w)),
                       rng.uniform(extent / 16, extent / 6), rng.uniform(0.0, 0.2)});
    }
  }
  std::vector<double> image(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / static_cast<double>(h) - 0.5;
      const double fx = static_cast<double>(x) / static_cast<double>(w) - 0.5;
      double v = base + gy * fy + gx * fx;
      for (const Bump& b : bumps) {
        const double dy = static_cast<double>(y) - b.cy;
        const double dx = static_cast<double>(x) - b.cx;
        v += b.amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
      }
      image[y * w + x] = v;
    }
  }

  // Targets.
  s.mask.assign(h * w, 0);
  const std::size_t budget = static_cast<std::size_t>(std::ceil(kMaxTargetFraction * static_cast<double>(h * w))) - 1;
  std::size_t used = 0;
  const std::size_t count = spec.min_targets + rng.index(spec.max_targets - spec.min_targets + 1);
  for (std::size_t t = 0; t < count; ++t) {
    const double radius = rng.uniform(spec.min_radius, spec.max_radius);
    const double peak = rng.uniform(spec.min_peak, spec.max_peak);
    const auto reach = static_cast<std::size_t>(std::ceil(radius));
    if (2 * reach + 1 > h || 2 * reach + 1 > w) continue;
    const std::size_t area = half_peak_area(radius);
    if (used + area > budget) continue;
    bool placed = false;
    TargetStamp stamp;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      stamp = {reach + rng.index(h - 2 * reach), reach + rng.index(w - 2 * reach), radius, peak};
      placed = std::all_of(s.targets.begin(), s.targets.end(), [&](const TargetStamp& o) {
        const double dy = static_cast<double>(stamp.cy) - static_cast<double>(o.cy);
        const double dx = static_cast<double>(stamp.cx) - static_cast<double>(o.cx);
        return std::sqrt(dy * dy + dx * dx) > stamp.radius + o.radius + 1.0;
      });
    }
    if (!placed) continue;
    const double sigma = radius / 2.0;
    const double half = half_peak_radius_sq(radius);
    for (std::size_t y = stamp.cy - reach; y <= stamp.cy + reach; ++y) {
      for (std::size_t x = stamp.cx - reach; x <= stamp.cx + reach; ++x) {
        const double dy = static_cast<double>(y) - static_cast<double>(stamp.cy);
        const double dx = static_cast<double>(x) - static_cast<double>(stamp.cx);
        const double d2 = dy * dy + dx * dx;
        if (d2 > radius * radius) continue;
        image[y * w + x] += peak * std::exp(-d2 / (2.0 * sigma * sigma));
        if (d2 <= half) s.mask[y * w + x] = 1;
      }
    }
    used += area;
    s.targets.push_back(stamp);
  }

  s.image.resize(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = image[i] + spec.noise_sigma * rng.normal();
    s.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return s;
}

std::vector<Sample> generate_dataset(const SceneSpec& spec, std::size_t count) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(spec, i));
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split: no samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in (0,1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train == 0) throw std::invalid_argument("split: training side rounds to zero samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(test)};
}

}  // namespace abc
