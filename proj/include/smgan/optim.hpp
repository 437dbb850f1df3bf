#pragma once

#include <cstddef>
#include <vector>

#include "smgan/autodiff.hpp"

namespace smgan {

/// Adam with bias correction. Moment tensors are allocated on the first step
/// and must keep matching the parameter list from then on.
struct AdamState {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double lr = 2e-4;
  double epsilon = 1e-8;
  std::size_t step_count = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(double beta1, double beta2, double lr = 2e-4, double epsilon = 1e-8)
      : beta1(beta1), beta2(beta2), lr(lr), epsilon(epsilon) {}
};

/// In-place parameter update from the gradients left by backward(). Throws
/// NumericalError on a non-finite gradient so the caller can abort the run
/// with a diagnostic rather than training on garbage.
void adam_step(AdamState& state, std::vector<Var>& params);

}  // namespace smgan
