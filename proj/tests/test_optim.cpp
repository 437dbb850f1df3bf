#include <cmath>
#include <vector>

#include "doctest.h"
#include "smgan/errors.hpp"
#include "smgan/ops.hpp"
#include "smgan/optim.hpp"

using namespace smgan;
using namespace smgan::ops;

namespace {

// Leaves grad = g on the parameter without touching its value.
void set_grad(Var& param, const Tensor& g) { backward(sum_all(mul(param, Var::constant(g)))); }

}  // namespace

TEST_CASE("adam first step with g=1 moves theta by about -lr") {
  Var theta = Var::param(Tensor({1}, {0.5}));
  std::vector<Var> params{theta};
  AdamState state(0.0, 0.9, 2e-4, 1e-8);
  set_grad(theta, Tensor({1}, {1.0}));
  adam_step(state, params);
  // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps).
  CHECK(theta.value()[0] == doctest::Approx(0.5 - 2e-4 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Var theta = Var::param(Tensor({3}, {1.0, -2.0, 0.25}));
  std::vector<Var> params{theta};
  AdamState state(0.5, 0.999);
  for (int step = 0; step < 4; ++step) {
    set_grad(theta, Tensor({3}));
    adam_step(state, params);
  }
  CHECK(theta.value()[0] == 1.0);
  CHECK(theta.value()[1] == -2.0);
  CHECK(theta.value()[2] == 0.25);
  CHECK(state.step_count == 4);
}

TEST_CASE("adam 3-step sequence matches an independent recomputation") {
  const double beta1 = 0.5, beta2 = 0.999, lr = 2e-4, eps = 1e-8;
  std::vector<double> grads{0.5, -1.2, 0.3};

  Var theta = Var::param(Tensor({1}, {1.0}));
  std::vector<Var> params{theta};
  AdamState state(beta1, beta2, lr, eps);
  for (double g : grads) {
    set_grad(theta, Tensor({1}, {g}));
    adam_step(state, params);
  }

  // Spreadsheet-style recomputation, written independently of the library.
  double x = 1.0, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    double g = grads[t - 1];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    double mh = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    double vh = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    x -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(std::abs(theta.value()[0] - x) < 1e-12);
}

TEST_CASE("adam rejects non-finite gradients with a diagnostic") {
  Var theta = Var::param(Tensor({1}, {0.0}));
  std::vector<Var> params{theta};
  AdamState state(0.0, 0.9);
  set_grad(theta, Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}));
  CHECK_THROWS_AS(adam_step(state, params), NumericalError);
}

TEST_CASE("adam state is pinned to its parameter list") {
  Var a = Var::param(Tensor({2}, {1.0, 2.0}));
  Var b = Var::param(Tensor({2}, {3.0, 4.0}));
  std::vector<Var> params{a, b};
  AdamState state(0.0, 0.9);
  set_grad(a, Tensor({2}, {0.1, 0.1}));
  set_grad(b, Tensor({2}, {0.1, 0.1}));
  adam_step(state, params);
  std::vector<Var> fewer{a};
  CHECK_THROWS_AS(adam_step(state, fewer), ContractError);
}
