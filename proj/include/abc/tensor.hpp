#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Element type of every tensor. The default build uses 32-bit floats; the
// float64 twin library (see src/CMakeLists.txt) redefines it.
#ifndef ABC_REAL
#define ABC_REAL float
#endif

namespace abc {

using real = ABC_REAL;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thrown for any operand shape/argument violation inside the engine.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TensorImpl;

/// Backward rule of one recorded op. Receives the op's output (for rules
/// that reuse forward values) and the gradient flowing into it, and
/// accumulates into the inputs' gradient buffers.
using BackwardFn = std::function<void(const TensorImpl& out, std::span<const real> grad_out)>;

struct OpNode {
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::shared_ptr<OpNode> node;  // null for leaves

  /// Gradient buffer, zero-filled on first access.
  std::span<real> grad_buffer();
};

/// Reference-semantics handle to a node of the autodiff graph. Copies share
/// storage; use clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const real> data() const;
  /// In-place write access. Only valid on leaves (parameters, inputs);
  /// mutating a tensor that is part of a live graph invalidates it.
  std::span<real> mutable_data();
  real item() const;
  real at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const real> grad() const;
  void zero_grad();

  /// Reverse pass from a single-element tensor.
  void backward() const;

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Deep copy as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  /// Used by op implementations: builds the output and records its node when
  /// grad mode is on and any input requires grad.
  static Tensor make_result(Shape shape, std::vector<real> data, std::string_view op,
                            std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Graph recording is disabled while an instance is alive (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

namespace debug {

/// Test hook: every backward rule tagged `op` sees its incoming gradient
/// multiplied by `scale`. An empty op name clears the fault.
void inject_backward_fault(std::string_view op, real scale);
void clear_backward_fault();

}  // namespace debug

}  // namespace abc
