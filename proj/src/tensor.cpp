#include "periodnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace periodnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

void Node::accumulate(std::span<const double> g) {
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

}  // namespace detail

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
}

}  // namespace

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value at tensor construction");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::span<const double> Tensor::data() const {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) needs a 2-D tensor");
  return node_->data[row * node_->shape[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (!node_) throw GraphError("use of undefined tensor");
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw GraphError("use of undefined tensor");
  if (!node_->is_leaf) throw GraphError("in-place write to a non-leaf tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->grad_buffer();
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on undefined tensor");
  if (loss.numel() != 1) throw GraphError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  auto root = loss.node();
  if (root->consumed) throw GraphError("backward already ran on this graph; rebuild it before calling again");
  if (!root->requires_grad) throw GraphError("backward on a detached graph (loss does not require grad)");

  // Iterative post-order DFS for the topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Release the tape: intermediates drop their closures and parent links.
  for (auto* node : order) {
    if (!node->is_leaf) {
      node->backward = nullptr;
      node->parents.clear();
      node->consumed = true;
    }
  }
  root->consumed = true;
}

}  // namespace periodnet
