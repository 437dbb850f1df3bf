#include "smgan/losses.hpp"

#include "smgan/errors.hpp"

namespace smgan {

using namespace smgan::ops;

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "ns") return LossKind::kNonSaturating;
  if (name == "hinge") return LossKind::kHinge;
  throw ArgumentError("unknown loss '" + name + "' (expected ns|hinge)");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::kNonSaturating ? "ns" : "hinge";
}

Var ns_loss_d(const Var& real_logits, const Var& fake_logits) {
  // -log sigma(x) = softplus(-x); -log(1 - sigma(x)) = softplus(x).
  return add(mean_all(softplus_op(neg(real_logits))), mean_all(softplus_op(fake_logits)));
}

Var ns_loss_g(const Var& fake_logits) { return mean_all(softplus_op(neg(fake_logits))); }

Var hinge_loss_d(const Var& real_logits, const Var& fake_logits) {
  Var real_term = mean_all(relu(add_scalar(neg(real_logits), 1.0)));
  Var fake_term = mean_all(relu(add_scalar(fake_logits, 1.0)));
  return add(real_term, fake_term);
}

Var hinge_loss_g(const Var& fake_logits) { return neg(mean_all(fake_logits)); }

Var discriminator_loss(LossKind kind, const Var& real_logits, const Var& fake_logits) {
  return kind == LossKind::kNonSaturating ? ns_loss_d(real_logits, fake_logits)
                                          : hinge_loss_d(real_logits, fake_logits);
}

Var generator_loss(LossKind kind, const Var& fake_logits) {
  return kind == LossKind::kNonSaturating ? ns_loss_g(fake_logits) : hinge_loss_g(fake_logits);
}

}  // namespace smgan
