#include "abc/network.hpp"

#include <stdexcept>

#include "abc/ops.hpp"

namespace abc {

std::string to_string(EncoderFirstLayer v) { return v == EncoderFirstLayer::clft ? "clft" : "conv_module"; }
std::string to_string(DecoderFirstLayer v) { return v == DecoderFirstLayer::ucdc ? "ucdc" : "conv_module"; }

EncoderFirstLayer parse_encoder_first_layer(const std::string& s) {
  if (s == "conv_module") return EncoderFirstLayer::conv_module;
  if (s == "clft") return EncoderFirstLayer::clft;
  throw std::invalid_argument("encoder first layer must be conv_module or clft, got '" + s + "'");
}

DecoderFirstLayer parse_decoder_first_layer(const std::string& s) {
  if (s == "ucdc") return DecoderFirstLayer::ucdc;
  if (s == "conv_module") return DecoderFirstLayer::conv_module;
  throw std::invalid_argument("decoder first layer must be ucdc or conv_module, got '" + s + "'");
}

void AbcConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("input dimension C must be positive");
  if (height == 0 || width == 0 || height % 16 != 0 || width % 16 != 0) {
    throw std::invalid_argument("input resolution must be a positive multiple of 16, got " + std::to_string(height) +
                                "x" + std::to_string(width));
  }
  for (int r : dilation_rates) {
    if (r < 1) throw std::invalid_argument("dilation rates must be >= 1");
  }
}

AbcConfig preset_config(const std::string& name, std::size_t height, std::size_t width) {
  AbcConfig config;
  config.height = height;
  config.width = width;
  if (name == "small" || name == "S") {
    config.input_dim = 16;
  } else if (name == "base" || name == "B") {
    config.input_dim = 32;
  } else if (name == "large" || name == "L") {
    config.input_dim = 64;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return config;
}

AbcNet::AbcNet(const AbcConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t c = config_.input_dim;
  const std::size_t h = config_.height;
  const std::size_t w = config_.width;
  const auto rates = config_.dilation_rates;

  if (config_.encoder_first_layer == EncoderFirstLayer::clft) {
    enc0_ = Clft(1, c, h, w, rates, rng);
  } else {
    enc0_ = ConvModule(1, c, rng);
  }
  enc1_ = Clft(c, 2 * c, h / 2, w / 2, rates, rng);
  enc2_ = Clft(2 * c, 4 * c, h / 4, w / 4, rates, rng);
  enc3_ = Clft(4 * c, 8 * c, h / 8, w / 8, rates, rng);
  transition_ = Ucdc(8 * c, 8 * c, rng);
  if (config_.decoder_first_layer == DecoderFirstLayer::ucdc) {
    dec3_ = Ucdc(16 * c, 4 * c, rng);
  } else {
    dec3_ = ConvModule(16 * c, 4 * c, rng);
  }
  dec2_ = ConvModule(8 * c, 2 * c, rng);
  dec1_ = ConvModule(4 * c, c, rng);
  dec0_ = ConvModule(2 * c, c, rng);
  head_ = PointwiseConv(c, 1, rng);
  if (config_.deep_supervision) {
    aux_heads_[0] = PointwiseConv(4 * c, 1, rng);
    aux_heads_[1] = PointwiseConv(2 * c, 1, rng);
    aux_heads_[2] = PointwiseConv(c, 1, rng);
  }
}

AbcOutput AbcNet::forward(const Tensor& image) const {
  const Shape expected{image.defined() && image.rank() == 4 ? image.dim(0) : 0, 1, config_.height, config_.width};
  if (!image.defined() || image.shape() != expected || expected[0] == 0) {
    throw ShapeError("resolution mismatch: model expects [N,1," + std::to_string(config_.height) + "," +
                     std::to_string(config_.width) + "], got " +
                     (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
  }
  Tensor e0 = std::visit([&](const auto& block) { return block.forward(image); }, enc0_);
  Tensor e1 = enc1_.forward(maxpool2x2(e0));
  Tensor e2 = enc2_.forward(maxpool2x2(e1));
  Tensor e3 = enc3_.forward(maxpool2x2(e2));
  Tensor t = transition_.forward(maxpool2x2(e3));

  Tensor d3 = std::visit([&](const auto& block) { return block.forward(concat_channels(upsample_bilinear2x(t), e3)); },
                         dec3_);
  Tensor d2 = dec2_.forward(concat_channels(upsample_bilinear2x(d3), e2));
  Tensor d1 = dec1_.forward(concat_channels(upsample_bilinear2x(d2), e1));
  Tensor d0 = dec0_.forward(concat_channels(upsample_bilinear2x(d1), e0));

  AbcOutput out;
  out.logits = head_(d0);
  if (config_.deep_supervision) {
    out.aux.push_back(upsample_bilinear(aux_heads_[0](d3), 8));
    out.aux.push_back(upsample_bilinear(aux_heads_[1](d2), 4));
    out.aux.push_back(upsample_bilinear(aux_heads_[2](d1), 2));
  }
  return out;
}

ParamList AbcNet::parameters() const {
  ParamList out;
  std::visit([&](const auto& block) { block.collect("enc0", out); }, enc0_);
  enc1_.collect("enc1", out);
  enc2_.collect("enc2", out);
  enc3_.collect("enc3", out);
  transition_.collect("transition", out);
  std::visit([&](const auto& block) { block.collect("dec3", out); }, dec3_);
  dec2_.collect("dec2", out);
  dec1_.collect("dec1", out);
  dec0_.collect("dec0", out);
  head_.collect("head", out);
  if (config_.deep_supervision) {
    for (std::size_t i = 0; i < aux_heads_.size(); ++i) aux_heads_[i].collect("aux" + std::to_string(i), out);
  }
  return out;
}

std::vector<const Clft*> AbcNet::clft_blocks() const {
  std::vector<const Clft*> out;
  if (const auto* first = std::get_if<Clft>(&enc0_)) out.push_back(first);
  out.push_back(&enc1_);
  out.push_back(&enc2_);
  out.push_back(&enc3_);
  return out;
}

std::vector<Clft*> AbcNet::clft_blocks() {
  std::vector<Clft*> out;
  for (const Clft* block : std::as_const(*this).clft_blocks()) out.push_back(const_cast<Clft*>(block));
  return out;
}

ParamList AbcNet::attention_parameters() const {
  ParamList out;
  std::size_t i = 0;
  for (const Clft* block : clft_blocks()) block->attention.collect("clft" + std::to_string(i++) + ".bam", out);
  return out;
}

}  // namespace abc
