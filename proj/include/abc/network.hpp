#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "abc/blocks.hpp"

namespace abc {

enum class EncoderFirstLayer { conv_module, clft };
enum class DecoderFirstLayer { ucdc, conv_module };

std::string to_string(EncoderFirstLayer v);
std::string to_string(DecoderFirstLayer v);
EncoderFirstLayer parse_encoder_first_layer(const std::string& s);
DecoderFirstLayer parse_decoder_first_layer(const std::string& s);

struct AbcConfig {
  std::size_t input_dim = 64;  // C
  std::size_t height = 256;
  std::size_t width = 256;
  EncoderFirstLayer encoder_first_layer = EncoderFirstLayer::conv_module;
  DecoderFirstLayer decoder_first_layer = DecoderFirstLayer::ucdc;
  std::array<int, 3> dilation_rates{2, 4, 2};  // CLFT dilated branch
  bool deep_supervision = true;

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;
};

/// Named size presets: small (C=16), base (C=32), large (C=64).
AbcConfig preset_config(const std::string& name, std::size_t height, std::size_t width);

struct AbcOutput {
  Tensor logits;            // [N,1,H,W]
  std::vector<Tensor> aux;  // deep-supervision logits, each [N,1,H,W]
};

/// The encoder-decoder segmentation network.
///
/// Encoder: ConvModule(1->C) at H, then maxpool + CLFT at H/2, H/4, H/8 with
/// channels C->2C->4C->8C; transition maxpool + UCDC(8C->8C) at H/16.
/// Decoder: each stage upsamples 2x, concatenates the matching encoder
/// output and reduces channels (16C->4C UCDC, 8C->2C, 4C->C, 2C->C conv
/// modules); a pointwise head maps C->1.
class AbcNet {
 public:
  AbcNet(const AbcConfig& config, std::uint64_t seed);

  AbcOutput forward(const Tensor& image) const;

  const AbcConfig& config() const { return config_; }
  /// Every learnable tensor, in a fixed order with stable names.
  ParamList parameters() const;
  /// Parameters of all bilinear-attention modules.
  ParamList attention_parameters() const;
  /// CLFT blocks in encoder order (includes the first layer when it is a CLFT).
  std::vector<const Clft*> clft_blocks() const;
  std::vector<Clft*> clft_blocks();

 private:
  AbcConfig config_;
  std::variant<ConvModule, Clft> enc0_;
  Clft enc1_, enc2_, enc3_;
  Ucdc transition_;
  std::variant<Ucdc, ConvModule> dec3_;
  ConvModule dec2_, dec1_, dec0_;
  PointwiseConv head_;
  std::array<PointwiseConv, 3> aux_heads_;
};

/// FLOPs of one forward pass of a single image (2 per multiply-accumulate;
/// convolutions, fully connected layers and matrix products).
std::uint64_t count_flops(const AbcConfig& config);

}  // namespace abc
