#include "abc/layers.hpp"

#include <cmath>

#include "abc/ops.hpp"

namespace abc {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const real bound = static_cast<real>(std::sqrt(3.0 / static_cast<double>(fan_in)));
  return random_uniform(std::move(shape), -bound, bound, rng, true);
}

Conv2d::Conv2d(std::size_t cin, std::size_t cout, int kernel, int dil, Rng& rng)
    : weight(fan_in_uniform({cout, cin, static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)},
                        cin * static_cast<std::size_t>(kernel * kernel), rng)),
      bias(Tensor::zeros({cout}, true)),
      dilation(dil) {
  if (kernel % 2 == 0) throw ShapeError("Conv2d: same padding needs an odd kernel");
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, 1, padding(), dilation); }

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

PointwiseConv::PointwiseConv(std::size_t cin, std::size_t cout, Rng& rng)
    : weight(fan_in_uniform({cout, cin, 1, 1}, cin, rng)), bias(Tensor::zeros({cout}, true)) {}

Tensor PointwiseConv::operator()(const Tensor& x) const { return pointwise_conv(x, weight, bias); }

void PointwiseConv::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight(fan_in_uniform({out_features, in_features}, in_features, rng)), bias(Tensor::zeros({out_features}, true)) {}

Tensor Linear::operator()(const Tensor& x) const { return fully_connected(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

}  // namespace abc
