#include "abc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abc/ops.hpp"
#include "abc/random.hpp"

namespace abc {

double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, real eps) {
  Tensor x = point.clone(true);
  std::vector<Tensor> params{x};
  return grad_check_params([&] { return f(params[0]); }, params, ParamCheckOptions{eps, 0, 0});
}

double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params,
                         const ParamCheckOptions& options) {
  return grad_check_params_report(f, params, options).max_error;
}

GradCheckReport grad_check_params_report(const std::function<Tensor()>& f, std::span<Tensor> params,
                                         const ParamCheckOptions& options) {
  for (Tensor& p : params) p.zero_grad();
  Tensor root = f();
  root.backward();

  std::vector<std::vector<real>> analytic;
  analytic.reserve(params.size());
  for (Tensor& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0f);
    }
  }

  auto evaluate = [&](std::vector<std::uint64_t>* branches) {
    NoGradGuard guard;
    if (!branches) return static_cast<double>(f().item());
    BranchTrace trace;
    const double value = f().item();
    *branches = trace.fingerprints();
    return value;
  };
  std::vector<std::uint64_t> base_branches;
  std::vector<std::uint64_t> branches;
  if (options.skip_branch_changes) evaluate(&base_branches);
  std::vector<std::uint64_t>* probe = options.skip_branch_changes ? &branches : nullptr;

  Rng rng(options.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    std::span<real> values = params[t].mutable_data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_tensor != 0 && coords.size() > options.coords_per_tensor) {
      for (std::size_t i = 0; i < options.coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + rng.index(coords.size() - i)]);
      }
      coords.resize(options.coords_per_tensor);
    }
    for (std::size_t c : coords) {
      const real original = values[c];
      const real hi = original + options.eps;
      const real lo = original - options.eps;
      values[c] = hi;
      const double up = evaluate(probe);
      bool smooth = !probe || branches == base_branches;
      values[c] = lo;
      const double down = evaluate(probe);
      smooth = smooth && (!probe || branches == base_branches);
      values[c] = original;
      if (!smooth) {
        ++report.skipped;
        continue;
      }
      // Divide by the step actually representable in real.
      const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
      report.max_error = std::max(report.max_error, gradient_relative_error(analytic[t][c], numeric));
      ++report.checked;
    }
  }
  for (Tensor& p : params) p.zero_grad();
  return report;
}

}  // namespace abc
