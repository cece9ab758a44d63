#pragma once

#include <array>

#include "abc/layers.hpp"

namespace abc {

/// Two 3x3 convolutions, ReLU after each. The channel change happens at the
/// first one.
struct ConvModule {
  Conv2d conv1;
  Conv2d conv2;

  ConvModule() = default;
  ConvModule(std::size_t cin, std::size_t cout, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Bilinear attention module.
///
/// Two single-channel pointwise projections of the input are flattened over
/// H*W and mapped to length-H vectors q and k by fully connected layers; their
/// outer product q k^T is lifted to C channels by a pointwise conv and
/// normalized with a softmax over the last axis. The fully connected layers
/// fix the spatial resolution the block accepts.
struct BilinearAttention {
  PointwiseConv query_proj;  // C -> 1
  PointwiseConv key_proj;    // C -> 1
  Linear query_fc;           // H*W -> H
  Linear key_fc;             // H*W -> H
  PointwiseConv lift;        // 1 -> C
  std::size_t height = 0;
  std::size_t width = 0;

  BilinearAttention() = default;
  BilinearAttention(std::size_t channels, std::size_t height, std::size_t width, Rng& rng);

  /// [N,C,H,W] -> attention [N,C,H,H], rows summing to one.
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Convolution linear fusion transformer block.
///
///   v     = ConvBranch(I) + DilatedBranch(I)
///   O_att = attention(I) x v                  (per channel, along height)
///   O_hat = I + v + alpha * O_att
///   O     = Conv3x3(O_hat) + PW(O_hat)        (C -> out_channels)
struct Clft {
  BilinearAttention attention;
  std::array<Conv2d, 3> conv_branch;
  std::array<Conv2d, 3> dilated_branch;
  Tensor alpha;  // learnable scalar gate, shape [1]
  Conv2d ff_conv;
  PointwiseConv ff_pw;

  Clft() = default;
  /// out_channels defaults to 2 * in_channels when 0.
  Clft(std::size_t in_channels, std::size_t out_channels, std::size_t height, std::size_t width,
       std::array<int, 3> dilation_rates, Rng& rng);

  Tensor value(const Tensor& x) const;
  /// O_hat for a given attention map and value tensor.
  Tensor fuse(const Tensor& x, const Tensor& attn, const Tensor& v) const;
  Tensor feedforward(const Tensor& fused) const;
  Tensor forward(const Tensor& x) const;

  std::size_t in_channels() const { return ff_conv.in_channels(); }
  std::size_t out_channels() const { return ff_conv.out_channels(); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// attention [N,C,H,H] applied to v [N,C,H,W] channel by channel.
Tensor apply_attention(const Tensor& attn, const Tensor& v);

/// U-shaped convolution / dilated-convolution block:
///   x1 = relu(conv_in(I))            Cin -> Cout
///   x2 = relu(dconv_a(x1))           rate 2
///   x3 = relu(dconv_b(x2))           rate 4
///   x4 = relu(dconv_c(x3)) + x2      rate 2
///   x5 = relu(conv_out(x4)) + x1
struct Ucdc {
  Conv2d conv_in;
  Conv2d dconv_a;
  Conv2d dconv_b;
  Conv2d dconv_c;
  Conv2d conv_out;

  Ucdc() = default;
  Ucdc(std::size_t cin, std::size_t cout, Rng& rng, std::array<int, 3> dilation_rates = {2, 4, 2});

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace abc
