#pragma once

#include <span>

#include "abc/tensor.hpp"

namespace abc::detail {

/// grad(t) += g, when t participates in differentiation.
inline void accumulate(TensorImpl& t, std::span<const real> g) {
  if (!t.requires_grad) return;
  auto dst = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace abc::detail
