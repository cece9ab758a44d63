#include "abc/network.hpp"

namespace abc {

namespace {

using u64 = std::uint64_t;

u64 conv(u64 k, u64 cin, u64 cout, u64 h, u64 w) { return 2 * k * k * cin * cout * h * w; }

u64 conv_module(u64 cin, u64 cout, u64 h, u64 w) { return conv(3, cin, cout, h, w) + conv(3, cout, cout, h, w); }

u64 attention(u64 c, u64 h, u64 w) {
  const u64 projections = 2 * conv(1, c, 1, h, w);
  const u64 fcs = 2 * (2 * h * (h * w));
  const u64 outer = 2 * h * 1 * h;
  const u64 lift = conv(1, 1, c, h, h);
  return projections + fcs + outer + lift;
}

u64 clft(u64 cin, u64 cout, u64 h, u64 w) {
  const u64 value = 6 * conv(3, cin, cin, h, w);
  const u64 attend = 2 * cin * h * h * w;
  const u64 feedforward = conv(3, cin, cout, h, w) + conv(1, cin, cout, h, w);
  return attention(cin, h, w) + value + attend + feedforward;
}

u64 ucdc(u64 cin, u64 cout, u64 h, u64 w) { return conv(3, cin, cout, h, w) + 4 * conv(3, cout, cout, h, w); }

}  // namespace

std::uint64_t count_flops(const AbcConfig& config) {
  config.validate();
  const u64 c = config.input_dim;
  const u64 h = config.height;
  const u64 w = config.width;

  u64 total = config.encoder_first_layer == EncoderFirstLayer::clft ? clft(1, c, h, w) : conv_module(1, c, h, w);
  total += clft(c, 2 * c, h / 2, w / 2);
  total += clft(2 * c, 4 * c, h / 4, w / 4);
  total += clft(4 * c, 8 * c, h / 8, w / 8);
  total += ucdc(8 * c, 8 * c, h / 16, w / 16);
  total += config.decoder_first_layer == DecoderFirstLayer::ucdc ? ucdc(16 * c, 4 * c, h / 8, w / 8)
                                                                 : conv_module(16 * c, 4 * c, h / 8, w / 8);
  total += conv_module(8 * c, 2 * c, h / 4, w / 4);
  total += conv_module(4 * c, c, h / 2, w / 2);
  total += conv_module(2 * c, c, h, w);
  total += conv(1, c, 1, h, w);
  if (config.deep_supervision) {
    total += conv(1, 4 * c, 1, h / 8, w / 8) + conv(1, 2 * c, 1, h / 4, w / 4) + conv(1, c, 1, h / 2, w / 2);
  }
  return total;
}

}  // namespace abc
