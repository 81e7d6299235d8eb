#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace periodnet {

using Shape = std::vector<std::size_t>;

/** Raised when operand shapes do not satisfy an op's contract. */
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** Raised when a NaN or Inf is produced or supplied. */
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Misuse of the gradient tape (non-scalar loss, consumed graph, ...). */
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(std::span<const double> g);
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/**
 * Dense row-major f64 array with optional reverse-mode gradient tracking.
 *
 * Tensor is a cheap handle; copies share storage. Leaves created with
 * requires_grad=true are parameters and receive gradients from backward().
 */
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return data().size(); }

  std::span<const double> data() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  /** Gradient buffer; zeros if nothing has been accumulated yet. */
  std::vector<double> grad() const;
  void zero_grad();

  /**
   * In-place write access for leaves only (optimizers, finite differences).
   * Mutating a tensor that already feeds a recorded graph invalidates it.
   */
  std::span<double> mutable_data();
  std::span<double> mutable_grad();

  /** Copy of the values with no graph history and no gradient tracking. */
  Tensor detach() const;

  // Internal: used by ops to build the tape.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/**
 * Reverse-mode sweep from a scalar loss. Gradients accumulate into every
 * reachable requires_grad leaf. The recorded graph is released afterwards,
 * so a second call on the same loss is rejected.
 */
void backward(const Tensor& loss);

}  // namespace periodnet
