#pragma once

#include <string>

#include "smgan/ops.hpp"

namespace smgan {

enum class LossKind { kNonSaturating, kHinge };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

// All losses are written in minimization form for the player that owns them.

/// -mean(log sigma(real)) - mean(log(1 - sigma(fake))), softplus-stabilized.
Var ns_loss_d(const Var& real_logits, const Var& fake_logits);
/// -mean(log sigma(fake)).
Var ns_loss_g(const Var& fake_logits);

/// mean(max(0, 1 - real)) + mean(max(0, 1 + fake)).
Var hinge_loss_d(const Var& real_logits, const Var& fake_logits);
/// -mean(fake).
Var hinge_loss_g(const Var& fake_logits);

Var discriminator_loss(LossKind kind, const Var& real_logits, const Var& fake_logits);
Var generator_loss(LossKind kind, const Var& fake_logits);

}  // namespace smgan
