#include "tabkit/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace tabkit::ad {

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_size(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeMismatch("from_data: " + std::to_string(values.size()) +
                        " values for a shape of " +
                        std::to_string(shape_size(shape)));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeMismatch("rows() needs a rank-2 tensor");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeMismatch("cols() needs a rank-2 tensor");
  return node_->shape[1];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
}

double Tensor::value() const {
  if (size() != 1) throw NonScalarLoss();
  return node_->data[0];
}

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  node->requires_grad = needs_grad;
  if (needs_grad) {
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.handle());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(node));
}

Tape Tape::from_root(const Tensor& root) {
  Tape tape;
  if (!root.defined()) return tape;
  std::unordered_set<detail::Node*> visited;
  // Iterative postorder DFS: parents are appended before the node itself,
  // which yields forward topological order.
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.handle(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      auto parent = node->parents[next_parent++];
      if (visited.insert(parent.get()).second) {
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) throw NonScalarLoss();
  Tape tape = Tape::from_root(loss);
  for (const auto& node : tape.nodes()) {
    node->flow.assign(node->size(), 0.0);
  }
  loss.node()->flow[0] = 1.0;
  const auto& order = tape.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node& node = **it;
    if (node.backward_fn) node.backward_fn(node);
  }
  for (const auto& node : order) {
    if (node->requires_grad) {
      if (node->grad.empty()) node->grad.assign(node->size(), 0.0);
      for (std::size_t i = 0; i < node->size(); ++i) {
        node->grad[i] += node->flow[i];
      }
    }
    node->flow.clear();
    node->flow.shrink_to_fit();
  }
}

}  // namespace tabkit::ad
