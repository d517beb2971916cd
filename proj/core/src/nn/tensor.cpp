#include "lamod/nn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "lamod/error.hpp"

namespace lamod::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(shape[k]);
  }
  return s + ")";
}

namespace {

const Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw UsageError("operation on an undefined tensor");
  return *n;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = nn::numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (values.size() != nn::numel(shape)) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(nn::numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<double> Tensor::values() {
  checked(node_);
  return node_->value;
}
std::span<const double> Tensor::values() const { return checked(node_).value; }

double Tensor::item() const {
  const Node& n = checked(node_);
  if (n.value.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(n.shape));
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked(node_);
  if (!node_->is_leaf()) throw UsageError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return checked(node_).grad_populated; }

std::span<double> Tensor::grad() {
  checked(node_);
  node_->ensure_grad();
  return node_->grad;
}

std::span<const double> Tensor::grad() const {
  const Node& n = checked(node_);
  if (n.grad.size() != n.value.size()) throw UsageError("tensor has no gradient buffer");
  return n.grad;
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.assign(node_->value.size(), 0.0);
  node_->grad_populated = false;
}

Tensor Tensor::detach() const { return from(shape(), checked(node_).value, false); }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

namespace {

// Reverse topological order (root first) over nodes that require gradients.
std::vector<Node*> reverse_topological(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

void backward(const Tensor& root, std::span<const double> seed) {
  if (!root.defined()) throw UsageError("backward on an undefined tensor");
  Node* r = root.node().get();
  if (!r->requires_grad) throw UsageError("backward: tensor is not part of a graph that requires gradients");
  if (seed.size() != r->value.size()) throw ShapeError("backward: seed size does not match root");

  const auto order = reverse_topological(r);
  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    else n->ensure_grad();
  }
  for (std::size_t k = 0; k < seed.size(); ++k) r->grad[k] += seed[k];
  for (Node* n : order) {
    if (n->is_leaf()) {
      n->grad_populated = true;
    } else {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->backward(*n);
    }
  }
}

void backward(const Tensor& root) {
  if (!root.defined()) throw UsageError("backward on an undefined tensor");
  if (root.numel() != 1) {
    throw UsageError("backward without a seed needs a one-element tensor, got " + shape_string(root.shape()));
  }
  const double one = 1.0;
  backward(root, std::span<const double>(&one, 1));
}

}  // namespace lamod::nn
