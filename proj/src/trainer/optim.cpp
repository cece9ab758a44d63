#include "abc/optim.hpp"

#include <cmath>

namespace abc {

AdamWState AdamWState::zeros_like(const ParamList& params) {
  AdamWState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.tensor.numel(), 0.0f);
    s.second_moment.emplace_back(p.tensor.numel(), 0.0f);
  }
  return s;
}

void adamw_step(ParamList& params, AdamWState& state, const AdamWOptions& options, float lr) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adamw: optimizer state holds " + std::to_string(state.first_moment.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].tensor.numel() ||
        state.second_moment[i].size() != params[i].tensor.numel()) {
      throw ShapeError("adamw: moment buffer size mismatch for " + params[i].name);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(static_cast<double>(options.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(options.beta2), t);
  const float decay = 1.0f - lr * options.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].tensor;
    std::span<float> values = p.mutable_data();
    const bool has_grad = p.has_grad();
    std::span<const float> grad = has_grad ? p.grad() : std::span<const float>{};
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const float g = has_grad ? grad[k] : 0.0f;
      m[k] = options.beta1 * m[k] + (1.0f - options.beta1) * g;
      v[k] = options.beta2 * v[k] + (1.0f - options.beta2) * g * g;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      const auto update = static_cast<float>(static_cast<double>(lr) * m_hat / (std::sqrt(v_hat) + options.eps));
      // A zero step must not rewrite the value (-0.0 would become +0.0).
      if (update != 0.0f || decay != 1.0f) values[k] = values[k] * decay - update;
    }
  }
}

float poly_lr(float base_lr, std::uint64_t iter, std::uint64_t max_iter, float power) {
  if (max_iter == 0 || iter >= max_iter) return 0.0f;
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return static_cast<float>(static_cast<double>(base_lr) * std::pow(frac, static_cast<double>(power)));
}

}  // namespace abc
