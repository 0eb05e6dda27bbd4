// SPDX-License-Identifier: Apache-2.0
#include "centerscan/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace centerscan {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

Shape checked(Shape shape) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
  }
  return shape;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->shape = checked(std::move(shape));
  node->data.assign(shape_numel(node->shape), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->shape = checked(std::move(shape));
  if (shape_numel(node->shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(node->shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf()) throw std::logic_error("tensor: mutable_data on non-leaf");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("tensor: item() on " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("at: expected " + std::to_string(s.size()) + " indices");
  std::size_t flat = 0, axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw ShapeError("at: index out of range for " + shape_str(s));
    flat = flat * s[axis++] + i;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  return node_->grad_buffer();
}

bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }

void Tensor::zero_grad() {
  auto& g = node_->grad_buffer();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

Tensor Tensor::clone(bool requires_grad) const { return from(shape(), node_->data, requires_grad); }

const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::make(Shape shape, std::vector<double> data, std::vector<Tensor> parents, const char* op,
                    std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = checked(std::move(shape));
  node->data = std::move(data);
  node->op = op;
  bool any = g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_set<detail::Node*> visited;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      detail::Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

bool Tape::is_topological() const {
  std::unordered_map<const detail::Node*, std::size_t> pos;
  for (std::size_t i = 0; i < nodes_.size(); ++i) pos[nodes_[i]] = i;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& p : nodes_[i]->parents) {
      auto it = pos.find(p.get());
      if (it != pos.end() && it->second >= i) return false;
    }
  }
  return true;
}

void backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " +
                     (root.defined() ? shape_str(root.shape()) : std::string("undefined")));
  }
  Tape tape = Tape::record(root);
  if (tape.empty()) throw std::logic_error("backward: root does not require grad (empty tape)");

  auto& nodes = tape.nodes();
  for (auto* n : nodes) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  detail::Node* r = nodes.back();
  r->grad_buffer()[0] += 1.0;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
  // Interior buffers are scratch; release them.
  for (auto* n : nodes) {
    if (!n->is_leaf()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

}  // namespace centerscan
