#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "tabkit/errors.hpp"

namespace tabkit::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return s.empty() ? 0 : n;
}

namespace detail {

// One node of the dynamically built computation graph. `data` is the forward
// value, `grad` the persistent accumulator (empty until first backward),
// `flow` the scratch cotangent used while a backward pass is running.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  std::vector<double> flow;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t size() const { return data.size(); }
};

}  // namespace detail

// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  // 2-D accessors; throw on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  // Scalar convenience; throws unless size() == 1.
  double value() const;

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> handle() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds an op result node. The result requires grad iff any parent does;
// otherwise parent links and the backward rule are dropped.
Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn);

// Topologically ordered record of the operations reachable from one root:
// producers precede consumers, so reverse iteration visits each node after
// all of its consumers. Rebuilt per backward pass (define-by-run).
class Tape {
 public:
  static Tape from_root(const Tensor& root);
  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<detail::Node>>& nodes() const {
    return order_;
  }

 private:
  std::vector<std::shared_ptr<detail::Node>> order_;
};

// Seeds d(loss) = 1 and accumulates (+=) into the grad of every node that
// requires grad. Running it twice without zeroing doubles the grads.
void backward(const Tensor& loss);

}  // namespace tabkit::ad
