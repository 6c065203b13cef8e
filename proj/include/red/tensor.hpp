#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "red/types.hpp"

// Minimal reverse-mode differentiation core. Ops record a DAG of nodes;
// backward() walks it once in reverse topological order. A graph instance
// is single-threaded; distinct graphs may run concurrently.
namespace red::ad {

using Shape = std::vector<int>;

size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until materialized
  bool requires_grad{false};
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  size_t size() const { return values.size(); }
  double* grad_data();  // materializes zeros on first use
};

// Value handle onto a shared node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  size_t size() const { return node_->values.size(); }

  double* data() { return node_->values.data(); }
  const double* data() const { return node_->values.data(); }
  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  double* grad_data() { return node_->grad_data(); }
  const std::vector<double>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  // Scalar convenience.
  double item() const;

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// True while op recording is enabled (default). Inference paths disable it
// to skip caches and closures.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds an op node. The closure is dropped (and the output detached) when
// recording is off or no parent requires grad.
Tensor make_op(Shape shape, std::vector<double> values,
               const std::vector<Tensor>& parents,
               std::function<void(Node&)> backward_fn);

// Populates grad on every requires_grad tensor reachable from loss.
// Throws red::Error when loss is not a scalar.
void backward(const Tensor& loss);

// Elementwise / reduction ops (enough for losses and tests).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

}  // namespace red::ad
