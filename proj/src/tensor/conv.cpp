#include <algorithm>
#include <cmath>

#include "abc/ops.hpp"

namespace abc {

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w;
  std::size_t cout, kernel;
  std::size_t ho, wo;
  int stride, padding, dilation;

  std::size_t patch() const { return cin * kernel * kernel; }
  std::size_t pixels() const { return ho * wo; }
};

// col[k, p] with k = (ci, ky, kx), p = (oy, ox).
void im2col(const real* src, const ConvGeometry& g, real* col) {
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const real* plane = src + ci * g.h * g.w;
    for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
        real* row = col + ((ci * g.kernel + ky) * g.kernel + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride - g.padding + ky * g.dilation;
          real* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill_n(dst, g.wo, 0.0f);
            continue;
          }
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * g.stride - g.padding + kx * g.dilation;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0f : plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix];
          }
        }
      }
    }
  }
}

// Transposed layout colT[p, k]; used by the backward pass so both gradient
// products run contiguous axpy loops.
void im2col_t(const real* src, const ConvGeometry& g, real* colt) {
  const std::size_t patch = g.patch();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const real* plane = src + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t kidx = (ci * g.kernel + ky) * g.kernel + kx;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride - g.padding +
                                    static_cast<std::ptrdiff_t>(ky) * g.dilation;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * g.stride - g.padding +
                                      static_cast<std::ptrdiff_t>(kx) * g.dilation;
            const bool inside = iy >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) && ix >= 0 &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            colt[(oy * g.wo + ox) * patch + kidx] = inside ? plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_t(const real* colt, const ConvGeometry& g, real* dst) {
  const std::size_t patch = g.patch();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    real* plane = dst + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t kidx = (ci * g.kernel + ky) * g.kernel + kx;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride - g.padding +
                                    static_cast<std::ptrdiff_t>(ky) * g.dilation;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * g.stride - g.padding +
                                      static_cast<std::ptrdiff_t>(kx) * g.dilation;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix] += colt[(oy * g.wo + ox) * patch + kidx];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, int kernel, int stride, int padding, int dilation) {
  if (kernel < 1 || stride < 1 || dilation < 1 || padding < 0) {
    throw ShapeError("conv: kernel, stride and dilation must be >= 1 and padding >= 0");
  }
  const long long span = static_cast<long long>(in) + 2LL * padding - static_cast<long long>(dilation) * (kernel - 1) - 1;
  if (span < 0) {
    throw ShapeError("conv: non-positive output size for input extent " + std::to_string(in));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding, int dilation) {
  if (!x.defined() || !weight.defined()) throw ShapeError("conv2d: undefined operand");
  if (x.rank() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels but weight expects " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.defined() && bias.shape() != Shape{weight.dim(0)}) {
    throw ShapeError("conv2d: bias must be [Cout], got " + shape_str(bias.shape()));
  }
  const int k = static_cast<int>(weight.dim(2));
  ConvGeometry g{x.dim(0),
                 x.dim(1),
                 x.dim(2),
                 x.dim(3),
                 weight.dim(0),
                 weight.dim(2),
                 conv_output_size(x.dim(2), k, stride, padding, dilation),
                 conv_output_size(x.dim(3), k, stride, padding, dilation),
                 stride,
                 padding,
                 dilation};

  const std::size_t patch = g.patch();
  const std::size_t pix = g.pixels();
  std::vector<real> out(g.batch * g.cout * pix);
  std::vector<real> col(patch * pix);
  auto xd = x.data();
  auto wd = weight.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(xd.data() + n * g.cin * g.h * g.w, g, col.data());
    real* y = out.data() + n * g.cout * pix;
    for (std::size_t co = 0; co < g.cout; ++co) {
      real* yrow = y + co * pix;
      std::fill_n(yrow, pix, bias.defined() ? bias.data()[co] : 0.0f);
      const real* wrow = wd.data() + co * patch;
      for (std::size_t kk = 0; kk < patch; ++kk) {
        const real wv = wrow[kk];
        const real* crow = col.data() + kk * pix;
        for (std::size_t p = 0; p < pix; ++p) yrow[p] += wv * crow[p];
      }
    }
  }
  FlopCounter::record(2ull * g.batch * g.cout * patch * pix);

  auto xi = x.impl();
  auto wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  return Tensor::make_result(
      {g.batch, g.cout, g.ho, g.wo}, std::move(out), "conv2d", {x, weight, bias},
      [xi, wi, bi, g](const TensorImpl&, std::span<const real> grad) {
        const std::size_t patch = g.patch();
        const std::size_t pix = g.pixels();
        std::vector<real> colt(pix * patch);
        std::vector<real> dcolt;
        if (xi->requires_grad) dcolt.resize(pix * patch);
        real* gw = wi->requires_grad ? wi->grad_buffer().data() : nullptr;
        real* gb = (bi && bi->requires_grad) ? bi->grad_buffer().data() : nullptr;
        const real* wd = wi->data.data();
        for (std::size_t n = 0; n < g.batch; ++n) {
          const real* dy = grad.data() + n * g.cout * pix;
          if (gb) {
            for (std::size_t co = 0; co < g.cout; ++co) {
              real acc = 0.0f;
              for (std::size_t p = 0; p < pix; ++p) acc += dy[co * pix + p];
              gb[co] += acc;
            }
          }
          if (gw) {
            im2col_t(xi->data.data() + n * g.cin * g.h * g.w, g, colt.data());
            for (std::size_t co = 0; co < g.cout; ++co) {
              real* gwrow = gw + co * patch;
              for (std::size_t p = 0; p < pix; ++p) {
                const real d = dy[co * pix + p];
                if (d == 0.0f) continue;
                const real* crow = colt.data() + p * patch;
                for (std::size_t kk = 0; kk < patch; ++kk) gwrow[kk] += d * crow[kk];
              }
            }
          }
          if (xi->requires_grad) {
            std::fill(dcolt.begin(), dcolt.end(), 0.0f);
            for (std::size_t p = 0; p < pix; ++p) {
              real* drow = dcolt.data() + p * patch;
              for (std::size_t co = 0; co < g.cout; ++co) {
                const real d = dy[co * pix + p];
                if (d == 0.0f) continue;
                const real* wrow = wd + co * patch;
                for (std::size_t kk = 0; kk < patch; ++kk) drow[kk] += d * wrow[kk];
              }
            }
            col2im_t(dcolt.data(), g, xi->grad_buffer().data() + n * g.cin * g.h * g.w);
          }
        }
      });
}

Tensor pointwise_conv(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.defined() && (weight.rank() != 4 || weight.dim(2) != 1 || weight.dim(3) != 1)) {
    throw ShapeError("pointwise_conv: weight must be [Cout,Cin,1,1], got " + shape_str(weight.shape()));
  }
  return conv2d(x, weight, bias, 1, 0, 1);
}

Tensor maxpool2x2(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("maxpool2x2: input must be [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2x2: odd spatial size " + shape_str(x.shape()));
  const std::size_t ho = h / 2;
  const std::size_t wo = w / 2;
  auto in = x.data();
  std::vector<real> out(planes * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t base = pl * h * w + 2 * oy * w + 2 * ox;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (in[cand[i]] > in[best]) best = cand[i];
        }
        const std::size_t o = (pl * ho + oy) * wo + ox;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  if (BranchTrace::active()) {
    std::uint64_t fp = 0xcbf29ce484222325ull;
    for (std::size_t a : argmax) fp = (fp ^ a) * 0x100000001b3ull;
    BranchTrace::record(fp);
  }
  auto xi = x.impl();
  return Tensor::make_result({x.dim(0), x.dim(1), ho, wo}, std::move(out), "maxpool2x2", {x},
                             [xi, argmax = std::move(argmax)](const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
                             });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  real l0, l1;
};

// Source taps for align_corners=false resampling along one axis.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t factor) {
  std::vector<Tap> taps(in * factor);
  const real inv = 1.0f / static_cast<real>(factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    real src = (static_cast<real>(o) + 0.5f) * inv - 0.5f;
    if (src < 0.0f) src = 0.0f;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const real frac = src - static_cast<real>(i0);
    taps[o] = {i0, i1, 1.0f - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int factor) {
  if (x.rank() != 4) throw ShapeError("upsample_bilinear: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (factor < 1) throw ShapeError("upsample_bilinear: factor must be >= 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  const std::size_t ho = h * f;
  const std::size_t wo = w * f;
  auto ty = bilinear_taps(h, f);
  auto tx = bilinear_taps(w, f);
  auto in = x.data();
  std::vector<real> out(planes * ho * wo);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const real* src = in.data() + pl * h * w;
    real* dst = out.data() + pl * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const Tap& b = tx[ox];
        dst[oy * wo + ox] = a.l0 * (b.l0 * src[a.i0 * w + b.i0] + b.l1 * src[a.i0 * w + b.i1]) +
                            a.l1 * (b.l0 * src[a.i1 * w + b.i0] + b.l1 * src[a.i1 * w + b.i1]);
      }
    }
  }
  auto xi = x.impl();
  return Tensor::make_result({x.dim(0), x.dim(1), ho, wo}, std::move(out), "upsample_bilinear", {x},
                             [xi, ty = std::move(ty), tx = std::move(tx), planes, h, w, ho, wo](
                                 const TensorImpl&, std::span<const real> g) {
                               if (!xi->requires_grad) return;
                               auto gx = xi->grad_buffer();
                               for (std::size_t pl = 0; pl < planes; ++pl) {
                                 real* dst = gx.data() + pl * h * w;
                                 const real* go = g.data() + pl * ho * wo;
                                 for (std::size_t oy = 0; oy < ho; ++oy) {
                                   const Tap& a = ty[oy];
                                   for (std::size_t ox = 0; ox < wo; ++ox) {
                                     const Tap& b = tx[ox];
                                     const real v = go[oy * wo + ox];
                                     dst[a.i0 * w + b.i0] += v * a.l0 * b.l0;
                                     dst[a.i0 * w + b.i1] += v * a.l0 * b.l1;
                                     dst[a.i1 * w + b.i0] += v * a.l1 * b.l0;
                                     dst[a.i1 * w + b.i1] += v * a.l1 * b.l1;
                                   }
                                 }
                               }
                             });
}

}  // namespace abc
