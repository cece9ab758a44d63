#pragma once

#include <cstdint>
#include <vector>

#include "abc/tensor.hpp"

namespace abc {

// Elementwise / reductions ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
/// x * s where s is a single-element tensor (learnable gates).
Tensor mul_scalar(const Tensor& x, const Tensor& s);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Max-subtracted softmax over `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

// Shape ----------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
/// Concatenation of two NCHW maps along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Linear algebra -------------------------------------------------------------

/// y = W x + b for x of shape [M] (or [N,M] row-batched), W [K,M], b [K].
Tensor fully_connected(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// out[b] = a[b] * rhs[b] for a [B,M,K], rhs [B,K,N].
Tensor batched_matmul(const Tensor& a, const Tensor& rhs);

// Spatial --------------------------------------------------------------------

/// Zero-padded cross-correlation. x [N,Cin,H,W], weight [Cout,Cin,k,k],
/// bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding,
              int dilation);
/// 1x1 convolution, weight [Cout,Cin,1,1].
Tensor pointwise_conv(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// 2x2 / stride-2 max pooling; gradient goes to the first maximum in
/// row-major window order.
Tensor maxpool2x2(const Tensor& x);
/// Bilinear upsampling by an integer factor, align_corners = false.
Tensor upsample_bilinear(const Tensor& x, int factor);
inline Tensor upsample_bilinear2x(const Tensor& x) { return upsample_bilinear(x, 2); }

/// Output extent of a convolution along one axis; throws ShapeError when it
/// would be non-positive.
std::size_t conv_output_size(std::size_t in, int kernel, int stride, int padding, int dilation);

/// Tallies FLOPs (2 per multiply-accumulate) of conv2d, fully_connected and
/// batched_matmul executed on this thread while alive.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;

  std::uint64_t total() const { return total_; }
  static void record(std::uint64_t flops);

 private:
  std::uint64_t total_ = 0;
  FlopCounter* previous_;
};

/// Records one fingerprint per relu / maxpool2x2 call executed on this
/// thread while alive: a hash of the relu sign pattern or of the pooling
/// argmax positions. Equal traces mean the same piecewise-linear branch.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  const std::vector<std::uint64_t>& fingerprints() const { return fingerprints_; }
  static bool active();
  static void record(std::uint64_t fingerprint);

 private:
  std::vector<std::uint64_t> fingerprints_;
  BranchTrace* previous_;
};

}  // namespace abc
