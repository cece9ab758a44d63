#include "abc/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace abc {

namespace {

thread_local bool g_grad_mode = true;

struct BackwardFault {
  std::string op;
  real scale = 1.0f;
};
BackwardFault g_fault;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::span<real> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<real> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<real>(n, value), requires_grad);
}

Tensor Tensor::scalar(real value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const real> Tensor::data() const { return impl_->data; }

std::span<real> Tensor::mutable_data() { return impl_->data; }

real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

real Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch for shape " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range for shape " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw std::logic_error("requires_grad can only be toggled on leaves");
  impl_->requires_grad = on;
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const real> Tensor::grad() const {
  if (impl_->grad.empty()) throw std::logic_error("tensor has no gradient");
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a single-element root, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) return;

  // Iterative post-order DFS; reversing it gives a valid reverse-topological
  // schedule even for shared subexpressions.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      TensorImpl* child = node->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  impl_->grad_buffer()[0] += 1.0f;
  std::vector<real> scaled;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node || t->grad.empty()) continue;
    std::span<const real> g = t->grad;
    if (!g_fault.op.empty() && t->node->op == g_fault.op) {
      scaled.assign(g.begin(), g.end());
      for (real& v : scaled) v *= g_fault.scale;
      g = scaled;
    }
    t->node->backward(*t, g);
  }
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone(bool requires_grad) const {
  Tensor t = detach();
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::make_result(Shape shape, std::vector<real> data, std::string_view op,
                           std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!g_grad_mode) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!needs) return out;
  auto node = std::make_shared<OpNode>();
  node->op = op;
  for (const Tensor& t : inputs) {
    if (t.defined()) node->inputs.push_back(t.impl_);
  }
  node->backward = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool grad_mode_enabled() { return g_grad_mode; }

namespace debug {

void inject_backward_fault(std::string_view op, real scale) {
  g_fault.op = std::string(op);
  g_fault.scale = scale;
}

void clear_backward_fault() { g_fault = {}; }

}  // namespace debug

}  // namespace abc
