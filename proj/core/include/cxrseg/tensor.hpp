#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cxrseg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
struct Node;

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};
}  // namespace detail

/// Gradient callback of a recorded operation. Receives the output values and
/// the upstream gradient; accumulates into the inputs it captured.
using BackwardFn =
    std::function<void(std::span<const double> out_values, std::span<const double> out_grad)>;

/// A recorded operation: the inputs it depends on plus its gradient callback.
struct Node {
  std::string name;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

/// Dense row-major array of doubles with optional reverse-mode gradient.
///
/// Copies are shallow: two Tensor handles may refer to the same storage,
/// which is how parameters are shared between the optimizer and the graph.
/// Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> values();
  std::span<const double> values() const;
  double item() const;
  double& at(std::size_t flat) { return values()[flat]; }
  double at(std::size_t flat) const { return values()[flat]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad_fn() const;

  /// Gradient buffer; empty span until backward() reached this tensor.
  std::span<const double> grad() const;
  /// Accumulates `g` into the gradient buffer, allocating it on first use.
  void accumulate_grad(std::span<const double> g) const;
  /// Mutable gradient buffer, allocated and zero-filled on first use.
  std::span<double> grad_mut() const;
  void zero_grad() const;

  /// Back-propagates from this scalar tensor with seed 1.
  void backward() const;
  /// Back-propagates with an explicit upstream gradient of numel() entries.
  void backward(std::span<const double> seed) const;

  Tensor clone() const;
  /// Same storage, no graph; the result never requires grad.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  /// Attaches a graph node to `out` when any input requires grad.
  static Tensor record(Tensor out, std::string name, std::vector<Tensor> inputs,
                       BackwardFn backward);

 private:
  friend class Graph;
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Topologically ordered set of operations reachable from a root tensor.
class Graph {
 public:
  explicit Graph(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  std::vector<std::string> node_names() const;

  /// Runs every node's backward exactly once, in reverse topological order.
  void backward(std::span<const double> seed);

 private:
  Tensor root_;
  std::vector<detail::TensorImpl*> order_;  // producers before consumers
};

/// True when no value is NaN or infinite.
bool all_finite(std::span<const double> v);

}  // namespace cxrseg
