#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>

#include "lttd/num/tensor.hpp"

namespace lttd::num {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid only while the
// owning tape is alive.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  int64_t dim(int64_t axis) const { return value().dim(axis); }
  int64_t numel() const { return value().numel(); }
};

// Ordered record of executed ops. Backward replays the record in exact reverse
// order; gradients accumulate additively when a value feeds several ops.
// Single writer: one thread builds and consumes a tape.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    return push("leaf", std::move(value), requires_grad, nullptr);
  }

  // Records an op result. `inputs` decides whether the result needs a
  // gradient; `backward` is dropped when none of them does.
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                Backward backward) {
    bool rg = false;
    for (const Var<T>& v : inputs) rg = rg || requires_grad(v);
    return record(op, std::move(value), rg, std::move(backward));
  }

  Var<T> record(const char* op, Tensor<T> value, bool requires_grad, Backward backward) {
    require_finite(value, std::string("output of ") + op);
    return push(op, std::move(value), requires_grad, requires_grad ? std::move(backward) : nullptr);
  }

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }
  const char* op_name(Var<T> v) const { return node(v).op; }

  // Accumulated gradient; a zero tensor of the value's shape when nothing has
  // flowed into `v` yet.
  const Tensor<T>& grad(Var<T> v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  // Gradient buffer to add into, or nullptr when `v` does not need one.
  Tensor<T>* grad_sink(Var<T> v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return &n.grad;
  }

  // Seeds d(root)/d(root) = 1 and propagates to every recorded input.
  void backward(Var<T> root) {
    Node& r = node(root);
    if (r.value.numel() != 1) {
      throw DimensionError("backward() needs a scalar root, got shape " +
                           shape_str(r.value.shape()));
    }
    if (!r.requires_grad) return;
    if (r.grad.empty()) r.grad = Tensor<T>(r.value.shape());
    r.grad[0] += T(1);
    for (int32_t id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(n.grad);
    }
  }

  void zero_grad() {
    for (Node& n : nodes_) n.grad = Tensor<T>();
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad;
    Backward backward;
  };

  Var<T> push(const char* op, Tensor<T> value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{op, std::move(value), Tensor<T>(), requires_grad, std::move(backward)});
    return Var<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  Node& node(Var<T> v) {
    check(v);
    return nodes_[static_cast<size_t>(v.id)];
  }
  const Node& node(Var<T> v) const {
    check(v);
    return nodes_[static_cast<size_t>(v.id)];
  }
  void check(Var<T> v) const {
    if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
      throw std::logic_error("Var does not belong to this tape");
    }
  }

  // deque keeps references to earlier nodes stable while ops append.
  std::deque<Node> nodes_;
};

}  // namespace lttd::num
