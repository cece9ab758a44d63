#include "abc/ops.hpp"

#include <algorithm>
#include <cmath>

#include "grad_util.hpp"

namespace abc {

namespace {

thread_local FlopCounter* g_flop_counter = nullptr;
thread_local BranchTrace* g_branch_trace = nullptr;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
}

}  // namespace

FlopCounter::FlopCounter() : previous_(g_flop_counter) { g_flop_counter = this; }
FlopCounter::~FlopCounter() { g_flop_counter = previous_; }

void FlopCounter::record(std::uint64_t flops) {
  for (FlopCounter* c = g_flop_counter; c != nullptr; c = c->previous_) c->total_ += flops;
}

BranchTrace::BranchTrace() : previous_(g_branch_trace) { g_branch_trace = this; }
BranchTrace::~BranchTrace() { g_branch_trace = previous_; }

bool BranchTrace::active() { return g_branch_trace != nullptr; }

void BranchTrace::record(std::uint64_t fingerprint) {
  for (BranchTrace* t = g_branch_trace; t != nullptr; t = t->previous_) t->fingerprints_.push_back(fingerprint);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<real> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b},
                             [ai, bi](const TensorImpl&, std::span<const real> g) {
                               detail::accumulate(*ai, g);
                               detail::accumulate(*bi, g);
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<real> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b},
                             [ai, bi](const TensorImpl&, std::span<const real> g) {
                               detail::accumulate(*ai, g);
                               if (!bi->requires_grad) return;
                               auto gb = bi->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<real> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b},
                             [ai, bi](const TensorImpl&, std::span<const real> g) {
                               if (ai->requires_grad) {
                                 auto ga = ai->grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
                               }
                               if (bi->requires_grad) {
                                 auto gb = bi->grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
                               }
                             });
}

Tensor scale(const Tensor& x, real factor) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (real& v : out) v *= factor;
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "scale", {x},
                             [xi, factor](const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                             });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: gate must have one element, got " + shape_str(s.shape()));
  const real alpha = s.data()[0];
  std::vector<real> out(x.data().begin(), x.data().end());
  for (real& v : out) v *= alpha;
  auto xi = x.impl();
  auto si = s.impl();
  return Tensor::make_result(x.shape(), std::move(out), "mul_scalar", {x, s},
                             [xi, si](const TensorImpl&, std::span<const real> g) {
                               const real a = si->data[0];
                               if (xi->requires_grad) {
                                 auto gx = xi->grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * a;
                               }
                               if (si->requires_grad) {
                                 double acc = 0.0;
                                 for (std::size_t i = 0; i < g.size(); ++i) acc += double(g[i]) * xi->data[i];
                                 si->grad_buffer()[0] += static_cast<real>(acc);
                               }
                             });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (real v : x.data()) acc += v;
  auto xi = x.impl();
  return Tensor::make_result({1}, {static_cast<real>(acc)}, "sum", {x},
                             [xi](const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               for (real& v : xi->grad_buffer()) v += g[0];
                             });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (real v : x.data()) acc += v;
  const real inv = 1.0f / static_cast<real>(x.numel());
  auto xi = x.impl();
  return Tensor::make_result({1}, {static_cast<real>(acc / static_cast<double>(x.numel()))}, "mean", {x},
                             [xi, inv](const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               for (real& v : xi->grad_buffer()) v += g[0] * inv;
                             });
}

Tensor relu(const Tensor& x) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (real& v : out) v = v > 0.0f ? v : 0.0f;
  if (BranchTrace::active()) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the sign bits
    for (real v : out) h = (h ^ (v > 0.0f ? 1u : 0u)) * 0x100000001b3ull;
    BranchTrace::record(h);
  }
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "relu", {x},
                             [xi](const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 if (xi->data[i] > 0.0f) gx[i] += g[i];
                               }
                             });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<real> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-in[i]));
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "sigmoid", {x},
                             [xi](const TensorImpl& y, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 const real p = y.data[i];
                                 gx[i] += g[i] * p * (1.0f - p);
                               }
                             });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis out of range for " + shape_str(s));
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  auto in = x.data();
  std::vector<real> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t base = o * len * inner + r;
      real peak = in[base];
      for (std::size_t j = 1; j < len; ++j) peak = std::max(peak, in[base + j * inner]);
      real total = 0.0f;
      for (std::size_t j = 0; j < len; ++j) {
        const real e = std::exp(in[base + j * inner] - peak);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  auto xi = x.impl();
  return Tensor::make_result(s, std::move(out), "softmax", {x},
                             [xi, outer, inner, len](const TensorImpl& y, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t r = 0; r < inner; ++r) {
                                   const std::size_t base = o * len * inner + r;
                                   real dot = 0.0f;
                                   for (std::size_t j = 0; j < len; ++j) {
                                     dot += g[base + j * inner] * y.data[base + j * inner];
                                   }
                                   for (std::size_t j = 0; j < len; ++j) {
                                     const std::size_t k = base + j * inner;
                                     gx[k] += y.data[k] * (g[k] - dot);
                                   }
                                 }
                               }
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  auto xi = x.impl();
  return Tensor::make_result(std::move(shape), std::move(out), "reshape", {x},
                             [xi](const TensorImpl&, std::span<const real> g) { detail::accumulate(*xi, g); });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0);
  const std::size_t ca = a.dim(1) * a.dim(2) * a.dim(3);
  const std::size_t cb = b.dim(1) * b.dim(2) * b.dim(3);
  std::vector<real> out(n * (ca + cb));
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * ca), ca, out.begin() + static_cast<std::ptrdiff_t>(i * (ca + cb)));
    std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(i * cb), cb,
                out.begin() + static_cast<std::ptrdiff_t>(i * (ca + cb) + ca));
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result({n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)}, std::move(out), "concat", {a, b},
                             [ai, bi, n, ca, cb](const TensorImpl&, std::span<const real> g) {
                               for (std::size_t i = 0; i < n; ++i) {
                                 const std::size_t base = i * (ca + cb);
                                 if (ai->requires_grad) {
                                   auto ga = ai->grad_buffer();
                                   for (std::size_t k = 0; k < ca; ++k) ga[i * ca + k] += g[base + k];
                                 }
                                 if (bi->requires_grad) {
                                   auto gb = bi->grad_buffer();
                                   for (std::size_t k = 0; k < cb; ++k) gb[i * cb + k] += g[base + ca + k];
                                 }
                               }
                             });
}

Tensor fully_connected(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined(x, "fully_connected");
  require_defined(weight, "fully_connected");
  if (weight.rank() != 2) throw ShapeError("fully_connected: weight must be [K,M], got " + shape_str(weight.shape()));
  const std::size_t k_out = weight.dim(0);
  const std::size_t m_in = weight.dim(1);
  std::size_t rows = 0;
  Shape out_shape;
  if (x.rank() == 1 && x.dim(0) == m_in) {
    rows = 1;
    out_shape = {k_out};
  } else if (x.rank() == 2 && x.dim(1) == m_in) {
    rows = x.dim(0);
    out_shape = {rows, k_out};
  } else {
    throw ShapeError("fully_connected: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{k_out}) {
    throw ShapeError("fully_connected: bias must be [" + std::to_string(k_out) + "], got " + shape_str(bias.shape()));
  }
  auto xd = x.data();
  auto wd = weight.data();
  std::vector<real> out(rows * k_out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < k_out; ++k) {
      real acc = bias.defined() ? bias.data()[k] : 0.0f;
      for (std::size_t m = 0; m < m_in; ++m) acc += wd[k * m_in + m] * xd[r * m_in + m];
      out[r * k_out + k] = acc;
    }
  }
  FlopCounter::record(2ull * rows * k_out * m_in);
  auto xi = x.impl();
  auto wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  return Tensor::make_result(std::move(out_shape), std::move(out), "fully_connected", {x, weight, bias},
                             [xi, wi, bi, rows, k_out, m_in](const TensorImpl&, std::span<const real> g) {
                               if (xi->requires_grad) {
                                 auto gx = xi->grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t k = 0; k < k_out; ++k) {
                                     const real gk = g[r * k_out + k];
                                     for (std::size_t m = 0; m < m_in; ++m) gx[r * m_in + m] += gk * wi->data[k * m_in + m];
                                   }
                               }
                               if (wi->requires_grad) {
                                 auto gw = wi->grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t k = 0; k < k_out; ++k) {
                                     const real gk = g[r * k_out + k];
                                     for (std::size_t m = 0; m < m_in; ++m) gw[k * m_in + m] += gk * xi->data[r * m_in + m];
                                   }
                               }
                               if (bi && bi->requires_grad) {
                                 auto gb = bi->grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t k = 0; k < k_out; ++k) gb[k] += g[r * k_out + k];
                               }
                             });
}

Tensor batched_matmul(const Tensor& a, const Tensor& rhs) {
  if (a.rank() != 3 || rhs.rank() != 3 || a.dim(0) != rhs.dim(0) || a.dim(2) != rhs.dim(1)) {
    throw ShapeError("batched_matmul: incompatible " + shape_str(a.shape()) + " and " + shape_str(rhs.shape()));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t kk = a.dim(2);
  const std::size_t n = rhs.dim(2);
  auto ad = a.data();
  auto bd = rhs.data();
  std::vector<real> out(batch * m * n, 0.0f);
  for (std::size_t b = 0; b < batch; ++b) {
    const real* A = ad.data() + b * m * kk;
    const real* B = bd.data() + b * kk * n;
    real* C = out.data() + b * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < kk; ++p) {
        const real av = A[i * kk + p];
        for (std::size_t j = 0; j < n; ++j) C[i * n + j] += av * B[p * n + j];
      }
  }
  FlopCounter::record(2ull * batch * m * kk * n);
  auto ai = a.impl();
  auto bi = rhs.impl();
  return Tensor::make_result({batch, m, n}, std::move(out), "batched_matmul", {a, rhs},
                             [ai, bi, batch, m, kk, n](const TensorImpl&, std::span<const real> g) {
                               for (std::size_t b = 0; b < batch; ++b) {
                                 const real* A = ai->data.data() + b * m * kk;
                                 const real* B = bi->data.data() + b * kk * n;
                                 const real* G = g.data() + b * m * n;
                                 if (ai->requires_grad) {
                                   real* GA = ai->grad_buffer().data() + b * m * kk;
                                   for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t p = 0; p < kk; ++p) {
                                       real acc = 0.0f;
                                       for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                                       GA[i * kk + p] += acc;
                                     }
                                 }
                                 if (bi->requires_grad) {
                                   real* GB = bi->grad_buffer().data() + b * kk * n;
                                   for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t p = 0; p < kk; ++p) {
                                       const real av = A[i * kk + p];
                                       for (std::size_t j = 0; j < n; ++j) GB[p * n + j] += av * G[i * n + j];
                                     }
                                 }
                               }
                             });
}

}  // namespace abc
