#include "red/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace red::ad {

size_t numel(const Shape& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream ss;
  ss << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) ss << ", ";
    ss << shape[i];
  }
  ss << ")";
  return ss.str();
}

double* Node::grad_data() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->values.assign(numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw Error("tensor shape " + shape_str(shape) + " wants " +
                std::to_string(numel(shape)) + " values, got " +
                std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

void Tensor::zero_grad() { node_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1) {
    throw Error("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->values[0];
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor make_op(Shape shape, std::vector<double> values,
               const std::vector<Tensor>& parents,
               std::function<void(Node&)> backward_fn) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const Tensor& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  auto node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (const Tensor& p : parents) node->parents.push_back(p.node());
  node->backward_fn = std::move(backward_fn);
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error("backward requires a scalar loss, got shape " +
                (loss.defined() ? shape_str(loss.shape()) : "(undefined)"));
  }
  // Reverse topological order via iterative DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* child = node->parents[next_child++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      if (!self.parents[p]->requires_grad) continue;
      double* g = self.parents[p]->grad_data();
      for (size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      double* g = self.parents[0]->grad_data();
      for (size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      double* g = self.parents[1]->grad_data();
      for (size_t i = 0; i < self.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (self.parents[0]->requires_grad) {
      double* g = self.parents[0]->grad_data();
      for (size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (self.parents[1]->requires_grad) {
      double* g = self.parents[1]->grad_data();
      for (size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return make_op(a.shape(), std::move(out), {a}, [c](Node& self) {
    double* g = self.parents[0]->grad_data();
    for (size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * c;
  });
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    const auto& av = self.parents[0]->values;
    double* g = self.parents[0]->grad_data();
    for (size_t i = 0; i < self.size(); ++i) {
      g[i] += 2.0 * self.grad[i] * av[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += a.data()[i];
  return make_op({1}, {total}, {a}, [](Node& self) {
    double* g = self.parents[0]->grad_data();
    const double go = self.grad[0];
    for (size_t i = 0; i < self.parents[0]->size(); ++i) g[i] += go;
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw Error("mean of empty tensor");
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += a.data()[i];
  const double inv_n = 1.0 / static_cast<double>(a.size());
  return make_op({1}, {total * inv_n}, {a}, [inv_n](Node& self) {
    double* g = self.parents[0]->grad_data();
    const double go = self.grad[0] * inv_n;
    for (size_t i = 0; i < self.parents[0]->size(); ++i) g[i] += go;
  });
}

}  // namespace red::ad
