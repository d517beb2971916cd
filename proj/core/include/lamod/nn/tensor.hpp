#pragma once

// Dense tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto shared storage: copying a Tensor aliases the
// same values and gradient, as in most deep-learning frameworks. Every
// operation in ops.hpp returns a fresh tensor; when any input requires a
// gradient the result records a reverse rule and its parents, forming the
// graph traversed by backward().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lamod::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> values();
  std::span<const double> values() const;
  double item() const;  // value of a one-element tensor

  bool requires_grad() const;
  void set_requires_grad(bool on);

  // True once backward() (or set_grad) has written a gradient into a leaf.
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  // A new leaf holding a copy of the values, outside any graph.
  Tensor detach() const;

  // Internal: graph node access for op implementations.
  const std::shared_ptr<Node>& node() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool grad_populated = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grad. Empty for leaves.
  std::function<void(Node&)> backward;

  bool is_leaf() const noexcept { return !backward; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Creates the result node of an operation. If no parent requires a gradient
// the reverse rule is dropped and the result is a constant.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

// Seeds d(root)/d(root) = 1 for a one-element root (or `seed` for any shape)
// and accumulates gradients into every leaf that requires them. Gradients of
// leaves accumulate across calls; intermediate gradients are recomputed.
void backward(const Tensor& root);
void backward(const Tensor& root, std::span<const double> seed);

}  // namespace lamod::nn
