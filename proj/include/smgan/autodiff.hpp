#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "smgan/tensor.hpp"

namespace smgan {

class Var;

/// One node of the reverse-mode differentiation graph. Leaves have no
/// backward rule; interior nodes know how to turn an upstream gradient
/// into gradients for their parents. Backward rules produce Vars, so
/// gradients are themselves graph nodes and can be differentiated again
/// (needed by the gradient penalty and the Jacobian probes).
struct Node {
  Tensor value;
  Tensor grad;  // populated by backward()
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<std::vector<Var>(const Var& upstream)> backward_rule;
};

/// Shared handle to a Node; cheap to copy, value semantics on the handle.
class Var {
 public:
  Var() = default;
  /// Leaf holding a constant (no gradient tracked through it).
  static Var constant(Tensor value);
  /// Leaf holding a trainable parameter or differentiated input.
  static Var param(Tensor value);

  bool defined() const { return node_ != nullptr; }
  Node* node() const { return node_.get(); }

  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_->requires_grad; }

  /// Constant copy of this Var's value, cut off from the graph.
  Var detach() const { return constant(node_->value); }

  static Var make(Tensor value, std::vector<Var> parents,
                  std::function<std::vector<Var>(const Var&)> rule);

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

/// Populates node->grad for every node reachable from `root` (unreached
/// nodes keep zero gradients of their value's shape). Root must be scalar.
/// Each call recomputes gradients from scratch; repeated calls agree.
void backward(const Var& root);

/// Differentiable gradients of a scalar root with respect to `wrt`.
/// The returned Vars stay connected to the graph, so they can feed further
/// ops and be differentiated again. Unreachable entries come back as zero
/// constants of the matching shape.
std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt);

}  // namespace smgan
