#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "abc/tensor.hpp"

namespace abc {

/// |analytic - numeric| / max(1, |analytic|, |numeric|)
double gradient_relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of a scalar function against central
/// differences at `point`; returns the worst relative error over all
/// coordinates.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, real eps = 1e-3f);

struct ParamCheckOptions {
  real eps = 1e-3f;
  /// 0 checks every coordinate; otherwise a seeded sample of this many
  /// coordinates per tensor.
  std::size_t coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Skip coordinates whose +eps or -eps evaluation takes a different relu /
  /// maxpool branch than the unperturbed point; a central difference across
  /// a kink is not a derivative estimate.
  bool skip_branch_changes = false;
};

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Multi-tensor variant: `f` rebuilds the graph from `params` (leaves that
/// require grad) on each call. Params are perturbed in place and restored.
double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params,
                         const ParamCheckOptions& options = {});
GradCheckReport grad_check_params_report(const std::function<Tensor()>& f, std::span<Tensor> params,
                                         const ParamCheckOptions& options = {});

}  // namespace abc
