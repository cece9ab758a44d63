#include "abc/grad_battery.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "abc/gradcheck.hpp"
#include "abc/loss.hpp"
#include "abc/network.hpp"
#include "abc/network_gradcheck.hpp"
#include "abc/ops.hpp"
#include "abc/random.hpp"

namespace abc {

namespace {

using Case = std::function<double(Rng&, float eps)>;

// Values bounded away from zero so no coordinate sits within eps of the
// relu kink.
Tensor away_from_zero(Shape shape, Rng& rng) {
  std::vector<float> data(shape_numel(shape));
  for (float& v : data) {
    const float mag = static_cast<float>(rng.uniform(0.05, 1.0));
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor(std::move(shape), std::move(data), true);
}

// Distinct values spaced 0.01 apart in random order, so every pooling window
// has a unique maximum separated by more than 2 eps.
Tensor distinct_values(Shape shape, Rng& rng) {
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = 0.01f * static_cast<float>(order[i]) - 0.005f * static_cast<float>(n);
  return Tensor(std::move(shape), std::move(data), true);
}

double check(const std::function<Tensor()>& f, std::vector<Tensor> params, float eps) {
  return grad_check_params(f, params, {eps, 0, 0});
}

double conv_case(Rng& rng, float eps, int dilation) {
  const std::size_t cin = 1 + rng.index(3), cout = 1 + rng.index(3);
  const std::size_t h = 4 + rng.index(3), w = 4 + rng.index(3);
  Tensor x = random_uniform({2, cin, h, w}, -1, 1, rng, true);
  Tensor wt = random_uniform({cout, cin, 3, 3}, -1, 1, rng, true);
  Tensor b = random_uniform({cout}, -1, 1, rng, true);
  const int stride = dilation == 1 ? 1 + static_cast<int>(rng.index(2)) : 1;
  Tensor probe = conv2d(x, wt, b, stride, dilation, dilation);
  Tensor r = random_uniform(probe.shape(), -1, 1, rng);
  return check([&] { return sum(mul(conv2d(x, wt, b, stride, dilation, dilation), r)); }, {x, wt, b}, eps);
}

double pointwise_case(Rng& rng, float eps) {
  const std::size_t cin = 1 + rng.index(4), cout = 1 + rng.index(4);
  Tensor x = random_uniform({2, cin, 3, 4}, -1, 1, rng, true);
  Tensor wt = random_uniform({cout, cin, 1, 1}, -1, 1, rng, true);
  Tensor b = random_uniform({cout}, -1, 1, rng, true);
  Tensor r = random_uniform({2, cout, 3, 4}, -1, 1, rng);
  return check([&] { return sum(mul(pointwise_conv(x, wt, b), r)); }, {x, wt, b}, eps);
}

double fc_case(Rng& rng, float eps) {
  const std::size_t m = 2 + rng.index(5), k = 1 + rng.index(5);
  Tensor x = random_uniform({3, m}, -1, 1, rng, true);
  Tensor wt = random_uniform({k, m}, -1, 1, rng, true);
  Tensor b = random_uniform({k}, -1, 1, rng, true);
  Tensor r = random_uniform({3, k}, -1, 1, rng);
  return check([&] { return sum(mul(fully_connected(x, wt, b), r)); }, {x, wt, b}, eps);
}

double softmax_case(Rng& rng, float eps) {
  const std::size_t axis = rng.index(3);
  Tensor x = random_uniform({2, 3, 4}, -2, 2, rng, true);
  Tensor r = random_uniform({2, 3, 4}, -1, 1, rng);
  return check([&] { return sum(mul(softmax(x, axis), r)); }, {x}, eps);
}

double bmm_case(Rng& rng, float eps) {
  const std::size_t m = 1 + rng.index(4), k = 1 + rng.index(4), n = 1 + rng.index(4);
  Tensor a = random_uniform({2, m, k}, -1, 1, rng, true);
  Tensor b = random_uniform({2, k, n}, -1, 1, rng, true);
  Tensor r = random_uniform({2, m, n}, -1, 1, rng);
  return check([&] { return sum(mul(batched_matmul(a, b), r)); }, {a, b}, eps);
}

double maxpool_case(Rng& rng, float eps) {
  Tensor x = distinct_values({1, 2, 4, 6}, rng);
  Tensor r = random_uniform({1, 2, 2, 3}, -1, 1, rng);
  return check([&] { return sum(mul(maxpool2x2(x), r)); }, {x}, eps);
}

double upsample_case(Rng& rng, float eps) {
  const int factor = 2 + static_cast<int>(rng.index(3));
  Tensor x = random_uniform({1, 2, 3, 2}, -1, 1, rng, true);
  Tensor probe = upsample_bilinear(x, factor);
  Tensor r = random_uniform(probe.shape(), -1, 1, rng);
  return check([&] { return sum(mul(upsample_bilinear(x, factor), r)); }, {x}, eps);
}

double relu_case(Rng& rng, float eps) {
  Tensor x = away_from_zero({2, 3, 4}, rng);
  Tensor r = random_uniform({2, 3, 4}, -1, 1, rng);
  return check([&] { return sum(mul(relu(x), r)); }, {x}, eps);
}

double soft_iou_case(Rng& rng, float eps) {
  Tensor logits = random_uniform({2, 1, 4, 4}, -3, 3, rng, true);
  std::vector<float> t(32);
  for (float& v : t) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
  Tensor target({2, 1, 4, 4}, t);
  return check([&] { return soft_iou_loss(logits, target); }, {logits}, eps);
}

}  // namespace

std::vector<GradCheckRow> run_gradient_battery(const BatteryOptions& options) {
  std::vector<std::pair<std::string, Case>> cases{
      {"conv2d", [](Rng& r, float e) { return conv_case(r, e, 1); }},
      {"conv2d_dilated", [](Rng& r, float e) { return conv_case(r, e, 2 + static_cast<int>(r.index(2))); }},
      {"pointwise_conv", pointwise_case},
      {"fully_connected", fc_case},
      {"softmax", softmax_case},
      {"batched_matmul", bmm_case},
      {"maxpool2x2", maxpool_case},
      {"upsample_bilinear", upsample_case},
      {"relu", relu_case},
      {"soft_iou_loss", soft_iou_case},
  };
  std::vector<GradCheckRow> rows;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    GradCheckRow row;
    row.op = cases[c].first;
    for (std::size_t i = 0; i < options.instances; ++i) {
      Rng rng(mix_seed(mix_seed(options.seed, c), i));
      row.max_error = std::max(row.max_error, cases[c].second(rng, options.eps));
      ++row.instances;
    }
    row.passed = row.max_error < options.tolerance;
    rows.push_back(row);
  }
  if (options.include_network) {
    abc_gradcheck::NetworkCheckOptions net;
    net.seed = mix_seed(options.seed, cases.size());
    net.eps = options.network_eps;
    net.coords_per_tensor = options.network_coords_per_tensor;
    const auto r64 = abc_f64::network_grad_check(net);
    GradCheckRow row{"abc_network", 1, r64.max_error, r64.max_error < options.tolerance && r64.checked > 0, false,
                     "float64 build; " + std::to_string(r64.checked) + " coords; " + std::to_string(r64.skipped) +
                         " kink-crossing skipped"};
    rows.push_back(row);
    if (options.report_float32_network) {
      net.eps = options.eps;
      const auto r32 = abc::network_grad_check(net);
      rows.push_back({"abc_network_f32", 1, r32.max_error, r32.max_error < options.tolerance, true,
                      "float32 rounding floor; " + std::to_string(r32.checked) + " coords"});
    }
  }
  return rows;
}

}  // namespace abc
