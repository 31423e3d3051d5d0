#pragma once

#include <deque>
#include <functional>
#include <utility>

#include "relay/errors.hpp"
#include "relay/numcore/tensor.hpp"

namespace relay::num {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Records a forward computation as an ordered list of primitive ops and
/// replays it in reverse to accumulate gradients.
///
/// Nodes are appended in execution order, so the list is already a
/// topological order of the graph. A tape is built, run backward at most
/// once, and discarded; it is not movable because backward closures
/// capture its address.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf; never receives a gradient.
  Var input(Tensor v) { return record(std::move(v), false, nullptr); }

  /// Differentiable leaf.
  Var param(Tensor v) { return record(std::move(v), true, nullptr); }

  /// Append a node. `bwd` reads this node's gradient buffer and
  /// accumulates into its inputs'; pass nullptr for leaves.
  Var record(Tensor v, bool requires_grad, std::function<void()> bwd) {
    nodes_.push_back(Node{std::move(v), Tensor{}, std::move(bwd),
                          requires_grad && grad_enabled_});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  /// Installs the backward closure for a freshly recorded node. Dropped
  /// when the node needs no gradient, so inference tapes stay closure-free.
  Var attach(Var v, std::function<void()> bwd) {
    Node& n = node(v);
    if (n.requires_grad) n.bwd = std::move(bwd);
    return v;
  }

  const Tensor& value(Var v) const { return node(v).value; }

  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient buffer, allocated as zeros of the value's shape on first use.
  Tensor& grad_buffer(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  bool grad_allocated(Var v) const { return !node(v).grad.empty(); }

  /// Gradient of a node, by value; zeros if backward never reached it.
  Tensor grad(Var v) const {
    const Node& n = node(v);
    return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
  }

  /// Disables gradient recording for pure inference passes.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  /// Reverse sweep from a scalar loss node.
  void backward(Var loss) {
    if (value(loss).size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " +
                          Tensor::shape_string(value(loss).shape()));
    }
    if (!node(loss).requires_grad) {
      throw ContractError("backward: loss does not depend on any parameter");
    }
    grad_buffer(loss)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.bwd && !n.grad.empty()) n.bwd();
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> bwd;
    bool requires_grad = false;
  };

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

  // deque: values handed out by value() stay valid while the tape grows.
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace relay::num
