#include "cxrseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cxrseg/errors.hpp"

namespace cxrseg {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor rank must be at least 1");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<detail::TensorImpl>()) {
  check_extents(shape);
  impl_->values.assign(shape_numel(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  check_extents(shape);
  if (shape_numel(shape) != values.size())
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->values.size() : 0; }

std::span<double> Tensor::values() {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return impl_->values;
}

std::span<const double> Tensor::values() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return impl_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!impl_) throw UsageError("use of an undefined tensor");
  impl_->requires_grad = on;
}

bool Tensor::has_grad_fn() const { return impl_ && impl_->grad_fn != nullptr; }

std::span<const double> Tensor::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

std::span<double> Tensor::grad_mut() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const double> g) const {
  auto dst = grad_mut();
  if (g.size() != dst.size())
    throw ShapeError("gradient of size " + std::to_string(g.size()) + " for tensor " +
                     shape_str(impl_->shape));
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void Tensor::zero_grad() const {
  if (impl_) impl_->grad.clear();
}

void Tensor::backward() const {
  if (numel() != 1)
    throw UsageError("backward() without a seed needs a scalar, got " + shape_str(shape()));
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) const {
  if (!impl_ || (!impl_->grad_fn && !impl_->requires_grad))
    throw UsageError("backward() on a tensor with no recorded forward graph");
  Graph(*this).backward(seed);
}

Tensor Tensor::clone() const {
  if (!impl_) return {};
  return Tensor(impl_->shape, impl_->values, impl_->requires_grad);
}

Tensor Tensor::detach() const {
  Tensor t;
  if (!impl_) return t;
  t.impl_ = std::make_shared<detail::TensorImpl>();
  t.impl_->shape = impl_->shape;
  t.impl_->values = impl_->values;
  return t;
}

Tensor Tensor::record(Tensor out, std::string name, std::vector<Tensor> inputs,
                      BackwardFn backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  std::erase_if(inputs, [](const Tensor& t) { return !t.requires_grad(); });
  auto node = std::make_shared<Node>();
  node->name = std::move(name);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

Graph::Graph(const Tensor& root) : root_(root) {
  if (!root.impl_) throw UsageError("graph of an undefined tensor");
  // Iterative post-order DFS so deep graphs do not exhaust the stack.
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root.impl_.get(), 0);
  seen.insert(root.impl_.get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto* node = impl->grad_fn.get();
    if (node && next < node->inputs.size()) {
      auto* child = node->inputs[next++].impl_.get();
      if (seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order_.push_back(impl);
    stack.pop_back();
  }
}

std::vector<std::string> Graph::node_names() const {
  std::vector<std::string> names;
  for (const auto* impl : order_)
    if (impl->grad_fn) names.push_back(impl->grad_fn->name);
  return names;
}

void Graph::backward(std::span<const double> seed) {
  auto* root = root_.impl_.get();
  if (seed.size() != root->values.size())
    throw ShapeError("backward seed of size " + std::to_string(seed.size()) +
                     " for tensor " + shape_str(root->shape));
  root_.accumulate_grad(seed);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto* impl = *it;
    if (!impl->grad_fn || impl->grad.empty()) continue;
    impl->grad_fn->backward(impl->values, impl->grad);
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace cxrseg
