#pragma once

#include <cstdint>
#include <vector>

#include "abc/layers.hpp"

namespace abc {

struct AdamWOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;
};

/// First/second moment buffers, one per parameter in ParamList order.
struct AdamWState {
  std::uint64_t step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;

  static AdamWState zeros_like(const ParamList& params);
};

/// One decoupled-weight-decay Adam update:
///   p <- p * (1 - lr * wd)
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Parameters without an accumulated gradient are treated as having g = 0.
/// Throws ShapeError when the state does not match the parameter list.
void adamw_step(ParamList& params, AdamWState& state, const AdamWOptions& options, float lr);

/// base_lr * (1 - iter / max_iter)^power; 0 once iter >= max_iter.
float poly_lr(float base_lr, std::uint64_t iter, std::uint64_t max_iter, float power = 0.9f);

}  // namespace abc
