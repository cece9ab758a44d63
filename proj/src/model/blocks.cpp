#include "abc/blocks.hpp"

#include "abc/ops.hpp"

namespace abc {

ConvModule::ConvModule(std::size_t cin, std::size_t cout, Rng& rng)
    : conv1(cin, cout, 3, 1, rng), conv2(cout, cout, 3, 1, rng) {}

Tensor ConvModule::forward(const Tensor& x) const { return relu(conv2(relu(conv1(x)))); }

void ConvModule::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

BilinearAttention::BilinearAttention(std::size_t channels, std::size_t h, std::size_t w, Rng& rng)
    : query_proj(channels, 1, rng),
      key_proj(channels, 1, rng),
      query_fc(h * w, h, rng),
      key_fc(h * w, h, rng),
      lift(1, channels, rng),
      height(h),
      width(w) {}

Tensor BilinearAttention::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(2) != height || x.dim(3) != width) {
    throw ShapeError("attention: input " + shape_str(x.shape()) + " does not match the bound resolution " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t n = x.dim(0);
  const std::size_t h = height;
  Tensor q = query_fc(reshape(query_proj(x), {n, h * width}));  // [N,H]
  Tensor k = key_fc(reshape(key_proj(x), {n, h * width}));      // [N,H]
  Tensor outer = batched_matmul(reshape(q, {n, h, 1}), reshape(k, {n, 1, h}));
  Tensor logits = lift(reshape(outer, {n, 1, h, h}));  // [N,C,H,H]
  return softmax(logits, 3);
}

void BilinearAttention::collect(const std::string& prefix, ParamList& out) const {
  query_proj.collect(prefix + ".query_proj", out);
  key_proj.collect(prefix + ".key_proj", out);
  query_fc.collect(prefix + ".query_fc", out);
  key_fc.collect(prefix + ".key_fc", out);
  lift.collect(prefix + ".lift", out);
}

Tensor apply_attention(const Tensor& attn, const Tensor& v) {
  if (attn.rank() != 4 || v.rank() != 4 || attn.dim(0) != v.dim(0) || attn.dim(1) != v.dim(1) ||
      attn.dim(2) != v.dim(2) || attn.dim(3) != v.dim(2)) {
    throw ShapeError("apply_attention: attention " + shape_str(attn.shape()) + " incompatible with " +
                     shape_str(v.shape()));
  }
  const std::size_t nc = v.dim(0) * v.dim(1);
  const std::size_t h = v.dim(2);
  const std::size_t w = v.dim(3);
  return reshape(batched_matmul(reshape(attn, {nc, h, h}), reshape(v, {nc, h, w})), v.shape());
}

Clft::Clft(std::size_t in_channels, std::size_t out_channels, std::size_t height, std::size_t width,
           std::array<int, 3> dilation_rates, Rng& rng)
    : attention(in_channels, height, width, rng), alpha(Tensor::scalar(0.0f, true)) {
  if (out_channels == 0) out_channels = 2 * in_channels;
  for (auto& conv : conv_branch) conv = Conv2d(in_channels, in_channels, 3, 1, rng);
  for (std::size_t i = 0; i < 3; ++i) dilated_branch[i] = Conv2d(in_channels, in_channels, 3, dilation_rates[i], rng);
  ff_conv = Conv2d(in_channels, out_channels, 3, 1, rng);
  ff_pw = PointwiseConv(in_channels, out_channels, rng);
}

Tensor Clft::value(const Tensor& x) const {
  Tensor local = conv_branch[2](relu(conv_branch[1](relu(conv_branch[0](x)))));
  Tensor wide = dilated_branch[2](relu(dilated_branch[1](relu(dilated_branch[0](x)))));
  return add(local, wide);
}

Tensor Clft::fuse(const Tensor& x, const Tensor& attn, const Tensor& v) const {
  return add(add(x, v), mul_scalar(apply_attention(attn, v), alpha));
}

Tensor Clft::feedforward(const Tensor& fused) const { return add(ff_conv(fused), ff_pw(fused)); }

Tensor Clft::forward(const Tensor& x) const {
  Tensor attn = attention.forward(x);
  Tensor v = value(x);
  return feedforward(fuse(x, attn, v));
}

void Clft::collect(const std::string& prefix, ParamList& out) const {
  attention.collect(prefix + ".bam", out);
  for (std::size_t i = 0; i < 3; ++i) conv_branch[i].collect(prefix + ".conv_branch." + std::to_string(i), out);
  for (std::size_t i = 0; i < 3; ++i) dilated_branch[i].collect(prefix + ".dilated_branch." + std::to_string(i), out);
  out.push_back({prefix + ".alpha", alpha});
  ff_conv.collect(prefix + ".ff_conv", out);
  ff_pw.collect(prefix + ".ff_pw", out);
}

Ucdc::Ucdc(std::size_t cin, std::size_t cout, Rng& rng, std::array<int, 3> rates)
    : conv_in(cin, cout, 3, 1, rng),
      dconv_a(cout, cout, 3, rates[0], rng),
      dconv_b(cout, cout, 3, rates[1], rng),
      dconv_c(cout, cout, 3, rates[2], rng),
      conv_out(cout, cout, 3, 1, rng) {}

Tensor Ucdc::forward(const Tensor& x) const {
  Tensor x1 = relu(conv_in(x));
  Tensor x2 = relu(dconv_a(x1));
  Tensor x3 = relu(dconv_b(x2));
  Tensor x4 = add(relu(dconv_c(x3)), x2);
  return add(relu(conv_out(x4)), x1);
}

void Ucdc::collect(const std::string& prefix, ParamList& out) const {
  conv_in.collect(prefix + ".conv_in", out);
  dconv_a.collect(prefix + ".dconv_a", out);
  dconv_b.collect(prefix + ".dconv_b", out);
  dconv_c.collect(prefix + ".dconv_c", out);
  conv_out.collect(prefix + ".conv_out", out);
}

}  // namespace abc
