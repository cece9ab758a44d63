#pragma once

// Straight-line reference implementations. Each one is written from the
// defining formula with plain loops and shares no code with the engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "abc/metrics.hpp"
#include "abc/tensor.hpp"

namespace oracle {

using abc::real;

inline std::vector<double> as_double(const abc::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

/// Cross-correlation with zero padding, NCHW.
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t n, std::size_t cin, std::size_t h,
                                  std::size_t w, const std::vector<double>& weight, std::size_t cout, std::size_t k,
                                  const std::vector<double>& bias, int stride, int pad, int dil, std::size_t& oh,
                                  std::size_t& ow) {
  oh = (h + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  ow = (w + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  std::vector<double> out(n * cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky * dil) - pad;
                const long ix = static_cast<long>(ox * stride + kx * dil) - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += weight[((co * cin + ci) * k + ky) * k + kx] * x[((b * cin + ci) * h + iy) * w + ix];
              }
          out[((b * cout + co) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

/// Kernel [Cout,Cin,k,k] spread onto a ((k-1)d+1)^2 grid with zeros between taps.
inline std::vector<real> zero_inflate(const std::vector<real>& kernel, std::size_t cout, std::size_t cin,
                                      std::size_t k, std::size_t d, std::size_t& big) {
  big = (k - 1) * d + 1;
  std::vector<real> out(cout * cin * big * big, real(0));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t y = 0; y < k; ++y)
        for (std::size_t x = 0; x < k; ++x)
          out[((o * cin + i) * big + y * d) * big + x * d] = kernel[((o * cin + i) * k + y) * k + x];
  return out;
}

inline std::vector<double> maxpool2x2(const std::vector<double>& x, std::size_t nc, std::size_t h, std::size_t w) {
  std::vector<double> out(nc * (h / 2) * (w / 2));
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t xx = 0; xx < w / 2; ++xx) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, x[(c * h + 2 * y + dy) * w + 2 * xx + dx]);
        out[(c * (h / 2) + y) * (w / 2) + xx] = m;
      }
  return out;
}

inline double soft_iou(const std::vector<double>& logits, const std::vector<double>& target, double eps) {
  double inter = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    inter += p * target[i];
    sp += p;
    st += target[i];
  }
  return 1.0 - (inter + eps) / (sp + st - inter + eps);
}

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

inline Counts pixel_scan(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++c.tp;
    if (pred[i] && !truth[i]) ++c.fp;
    if (!pred[i] && truth[i]) ++c.fn;
  }
  return c;
}

inline double jaccard(const Counts& c) {
  const double u = static_cast<double>(c.tp + c.fp + c.fn);
  return u == 0 ? 1.0 : static_cast<double>(c.tp) / u;
}

inline double dice(const Counts& c) {
  const double d = static_cast<double>(2 * c.tp + c.fp + c.fn);
  return d == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / d;
}

}  // namespace oracle
