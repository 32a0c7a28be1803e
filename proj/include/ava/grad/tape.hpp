#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "ava/grad/array.hpp"

namespace ava::grad {

template <typename T>
class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Array<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape; }
  T item() const { return value().item(); }
  std::size_t id() const noexcept { return id_; }
  Tape<T>& tape() const { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// The computation record: nodes in creation order. Creation order is a valid
// topological order, so the backward pass is a single reverse sweep and
// fan-out gradients accumulate in a fixed order.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Array<T> value;
    Array<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Array<T> value, bool requires_grad = true) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> constant(Array<T> value) { return leaf(std::move(value), false); }

  // Appends an op result. The backward closure is kept only when some input
  // requires a gradient.
  Var<T> record(const char* op, Array<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward) {
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) ids.push_back(v.id());
    return record(op, std::move(value), std::move(ids), std::move(backward));
  }

  Var<T> record(const char* op, Array<T> value, std::vector<std::size_t> inputs,
                BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.op = op;
    for (std::size_t id : inputs) {
      node.requires_grad = node.requires_grad || nodes_.at(id).requires_grad;
    }
    node.inputs = std::move(inputs);
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  // Seeds d(root)/d(root) = 1 and sweeps the record backwards. Previous
  // gradients are discarded, so replaying gives identical results.
  void backward(const Var<T>& root) {
    if (root.value().size() != 1) {
      throw ShapeError("backward() requires a scalar root, got " + shape_string(root.shape()));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Array<T>();
    }
    Node& r = nodes_.at(root.id());
    r.grad = Array<T>(r.value.shape, T{1});
    r.has_grad = true;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, i);
    }
  }

  const Array<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Incoming gradient of a node during the backward sweep.
  const Array<T>& out_grad(std::size_t id) const { return nodes_[id].grad; }

  // Accumulation buffer for an input, or nullptr when it needs no gradient.
  Array<T>* grad_sink(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad = Array<T>(n.value.shape, T{0});
      n.has_grad = true;
    }
    return &n.grad;
  }

  // Gradient after backward(); zeros when the node was not reached.
  Array<T> gradient(const Var<T>& v) const {
    const Node& n = nodes_.at(v.id());
    if (!n.has_grad) return Array<T>(n.value.shape, T{0});
    return n.grad;
  }

 private:
  // deque: references to node values stay valid while new nodes are appended.
  std::deque<Node> nodes_;
};

}  // namespace ava::grad
