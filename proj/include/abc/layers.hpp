#pragma once

#include <string>
#include <vector>

#include "abc/random.hpp"
#include "abc/tensor.hpp"

namespace abc {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Fan-in uniform initialization U(-sqrt(3/fan_in), +sqrt(3/fan_in)), weight
/// variance 1/fan_in. The ReLU-compensated bound sqrt(6/fan_in) compounds
/// through the unnormalized residual sums and saturates the output sigmoid
/// at initialization.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// k x k convolution, stride 1, "same" zero padding (padding = dilation * (k-1) / 2).
/// Layers hold tensor handles: copying a layer shares its parameters.
struct Conv2d {
  Tensor weight;  // [Cout, Cin, k, k]
  Tensor bias;    // [Cout]
  int dilation = 1;

  Conv2d() = default;
  Conv2d(std::size_t cin, std::size_t cout, int kernel, int dilation, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  int kernel() const { return static_cast<int>(weight.dim(2)); }
  int padding() const { return dilation * (kernel() - 1) / 2; }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// 1x1 convolution.
struct PointwiseConv {
  Tensor weight;  // [Cout, Cin, 1, 1]
  Tensor bias;    // [Cout]

  PointwiseConv() = default;
  PointwiseConv(std::size_t cin, std::size_t cout, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  Tensor weight;  // [K, M]
  Tensor bias;    // [K]

  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace abc
