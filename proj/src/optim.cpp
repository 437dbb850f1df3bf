#include "smgan/optim.hpp"

#include <cmath>

#include "smgan/errors.hpp"

namespace smgan {

void adam_step(AdamState& state, std::vector<Var>& params) {
  if (state.m.empty()) {
    for (const Var& p : params) {
      state.m.emplace_back(Tensor(p.shape()));
      state.v.emplace_back(Tensor(p.shape()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double corr1 = 1.0 - std::pow(state.beta1, t);
  double corr2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = params[i].grad();
    Tensor& theta = params[i].value();
    if (g.size() == 0 && g.shape().empty()) {
      // Parameter outside the loss graph (e.g. the plain gamma/beta slots a
      // modulated BN site keeps but never reads): zero gradient, no update to
      // theta, but the moments still decay like any zero-gradient step.
      Tensor& m = state.m[i];
      Tensor& v = state.v[i];
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m[j] *= state.beta1;
        v[j] *= state.beta2;
        double m_hat = m[j] / corr1;
        double v_hat = v[j] / corr2;
        theta[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
      }
      continue;
    }
    if (g.shape() != theta.shape()) {
      throw ContractError("adam_step: gradient " + g.shape_string() + " vs parameter " +
                          theta.shape_string());
    }
    if (!g.all_finite()) {
      throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i) +
                           " at step " + std::to_string(state.step_count));
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      double m_hat = m[j] / corr1;
      double v_hat = v[j] / corr2;
      theta[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace smgan
