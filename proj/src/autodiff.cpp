#include "smgan/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>

#include "smgan/errors.hpp"
#include "smgan/ops.hpp"

namespace smgan {

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  return Var(std::move(n));
}

Var Var::param(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::make(Tensor value, std::vector<Var> parents,
              std::function<std::vector<Var>(const Var&)> rule) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  bool any = false;
  for (const auto& p : n->parents) any = any || p.requires_grad();
  n->requires_grad = any;
  if (any) n->backward_rule = std::move(rule);
  return Var(std::move(n));
}

namespace {

// Reverse topological order (root first) over nodes that require grad.
std::vector<Node*> topo_order(const Var& root, std::unordered_map<Node*, Var>& handles) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Var var;
    std::size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  if (root.node()->requires_grad) stack.push_back({root});
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* n = f.var.node();
    if (visited.count(n)) {
      stack.pop_back();
      continue;
    }
    handles.emplace(n, f.var);
    bool descended = false;
    while (f.next_parent < n->parents.size()) {
      const Var& p = n->parents[f.next_parent++];
      if (p.requires_grad() && !visited.count(p.node())) {
        stack.push_back({p});
        descended = true;
        break;
      }
    }
    if (!descended && f.next_parent >= n->parents.size()) {
      visited.insert(n);
      order.push_back(n);
      stack.pop_back();
    }
  }
  // order is post-order (leaves first); reverse for root-first sweep.
  return {order.rbegin(), order.rend()};
}

std::unordered_map<Node*, Var> grad_sweep(const Var& root) {
  if (root.value().size() != 1) {
    throw ContractError("backward root must be scalar, got " + root.value().shape_string());
  }
  std::unordered_map<Node*, Var> handles;
  std::vector<Node*> order = topo_order(root, handles);
  std::unordered_map<Node*, Var> grads;
  if (order.empty()) return grads;
  grads[root.node()] = Var::constant(Tensor::full(root.shape(), 1.0));
  for (Node* n : order) {
    auto it = grads.find(n);
    if (it == grads.end() || !n->backward_rule) continue;
    std::vector<Var> pg = n->backward_rule(it->second);
    for (std::size_t i = 0; i < n->parents.size(); ++i) {
      const Var& p = n->parents[i];
      if (!p.requires_grad() || !pg[i].defined()) continue;
      auto g = grads.find(p.node());
      if (g == grads.end()) {
        grads.emplace(p.node(), pg[i]);
      } else {
        g->second = ops::add(g->second, pg[i]);
      }
    }
  }
  return grads;
}

}  // namespace

void backward(const Var& root) {
  auto grads = grad_sweep(root);
  std::unordered_map<Node*, Var> handles;
  std::vector<Node*> order = topo_order(root, handles);
  for (Node* n : order) {
    auto it = grads.find(n);
    n->grad = (it != grads.end()) ? it->second.value() : Tensor(n->value.shape());
  }
}

std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt) {
  auto grads = grad_sweep(root);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto it = grads.find(w.node());
    if (it != grads.end()) {
      out.push_back(it->second);
    } else {
      out.push_back(Var::constant(Tensor(w.shape())));
    }
  }
  return out;
}

}  // namespace smgan
