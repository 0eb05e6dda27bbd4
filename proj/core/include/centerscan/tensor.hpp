// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace centerscan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thrown for any operand shape/contract violation in the numeric core.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily allocated, same length as data
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the parents that require grad.
  std::function<void(Node& self)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 array participating in define-by-run reverse mode.
///
/// A Tensor is a cheap handle; copies share storage. Results of primitives
/// are recorded (parents + backward closure) only when some operand requires
/// grad, so frozen or detached computations never grow the graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable access for leaves (parameters, inputs). Throws on interior nodes.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat) const { return data()[flat]; }
  /// Row-major multi-index; one index per axis.
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  /// Gradient buffer; all zeros when nothing has been accumulated.
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Deep copy of values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  const char* op_name() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  static Tensor make(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                     const char* op, std::function<void(detail::Node&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Nodes reachable from a root, ordered so every node follows its parents.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<detail::Node*>& nodes() const { return nodes_; }
  bool is_topological() const;

 private:
  std::vector<detail::Node*> nodes_;
};

/// While alive, primitives on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Accumulates d(root)/d(leaf) into every requires_grad leaf reachable from root.
/// Interior gradients are recomputed from scratch on every call, so repeated
/// calls on one graph add to leaf gradients exactly once per call.
void backward(const Tensor& root);

}  // namespace centerscan
