#include "smgan/layers.hpp"

#include <cmath>

#include "smgan/errors.hpp"

namespace smgan {

using namespace smgan::ops;

namespace {

std::vector<std::size_t> all_but_last(std::size_t rank) {
  std::vector<std::size_t> axes(rank - 1);
  for (std::size_t i = 0; i + 1 < rank; ++i) axes[i] = i;
  return axes;
}

void check_channels(const Var& h, std::size_t c, const char* op) {
  if (h.shape().size() < 2 || h.shape().back() != c) {
    throw ShapeError(std::string(op) + ": activations " + h.value().shape_string() +
                     " vs layer channels [" + std::to_string(c) + "]");
  }
}

Var as_batch(const Var& z) { return z.shape().size() == 1 ? reshape(z, {1, z.shape()[0]}) : z; }

double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
  return std::sqrt(s);
}

}  // namespace

BatchNormLayer::BatchNormLayer(std::size_t channels)
    : gamma(Var::param(Tensor::full({channels}, 1.0))),
      beta(Var::param(Tensor({channels}))),
      running_mean(Tensor({channels})),
      running_var(Tensor::full({channels}, 1.0)) {}

Var bn_normalize(BatchNormLayer& layer, const Var& h, Mode mode) {
  check_channels(h, layer.channels(), "batch_norm");
  Var mean, var;
  if (mode == Mode::kTrain) {
    auto [m, v] = batch_moments(h, all_but_last(h.shape().size()));
    mean = m;
    var = v;
    double keep = layer.momentum;
    for (std::size_t i = 0; i < layer.channels(); ++i) {
      layer.running_mean[i] = keep * layer.running_mean[i] + (1.0 - keep) * m.value()[i];
      layer.running_var[i] = keep * layer.running_var[i] + (1.0 - keep) * v.value()[i];
    }
  } else {
    mean = Var::constant(layer.running_mean);
    var = Var::constant(layer.running_var);
  }
  Var inv_std = rsqrt_op(add_scalar(var, layer.epsilon));
  return mul_channel(add_channel(h, neg(mean)), inv_std);
}

Var bn_forward(BatchNormLayer& layer, const Var& h, Mode mode) {
  Var hn = bn_normalize(layer, h, mode);
  return add_channel(mul_channel(hn, layer.gamma), layer.beta);
}

SelfModulator SelfModulator::init(std::size_t channels, std::size_t latent_dim, std::size_t hidden,
                                  double output_offset, Rng& rng) {
  SelfModulator mod;
  mod.u = Var::param(rng.normal_tensor({hidden, latent_dim}, 0.0, 0.02));
  mod.b = Var::param(Tensor({hidden}));
  mod.v = Var::param(Tensor({channels, hidden}));
  mod.output_offset = output_offset;
  return mod;
}

Var modulation_mlp(const SelfModulator& mod, const Var& z) {
  Var z2 = as_batch(z);
  if (z2.shape()[1] != mod.u.shape()[1]) {
    throw ShapeError("modulation_mlp: latent " + z.value().shape_string() + " vs U " +
                     mod.u.value().shape_string());
  }
  Var hidden = relu(add_channel(matmul(z2, transpose2d(mod.u)), mod.b));
  Var out = add_scalar(matmul(hidden, transpose2d(mod.v)), mod.output_offset);
  return z.shape().size() == 1 ? reshape(out, {out.shape()[1]}) : out;
}

Var sbn_forward(BatchNormLayer& layer, const SelfModulator& gamma_mod,
                const SelfModulator& beta_mod, const Var& h, const Var& z, Mode mode) {
  if (z.shape().size() != 2 || z.shape()[0] != h.shape().front()) {
    throw ShapeError("sbn_forward: latent batch " + z.value().shape_string() +
                     " vs activations " + h.value().shape_string());
  }
  Var gamma_z = modulation_mlp(gamma_mod, z);
  Var beta_z = modulation_mlp(beta_mod, z);
  Var hn = bn_normalize(layer, h, mode);
  return add_sample_channel(mul_sample_channel(hn, gamma_z), beta_z);
}

ConditionalBNLayer::ConditionalBNLayer(std::size_t num_classes, std::size_t channels)
    : gamma_table(Var::param(Tensor::full({num_classes, channels}, 1.0))),
      beta_table(Var::param(Tensor({num_classes, channels}))),
      running_mean(Tensor({channels})),
      running_var(Tensor::full({channels}, 1.0)) {}

Var cbn_forward(ConditionalBNLayer& layer, const Var& h, const std::vector<std::size_t>& labels,
                Mode mode) {
  if (labels.size() != h.shape().front()) {
    throw ShapeError("cbn_forward: " + std::to_string(labels.size()) + " labels vs activations " +
                     h.value().shape_string());
  }
  // Shares the statistics path with plain BN via a shim around the tables.
  BatchNormLayer stats(layer.channels());
  stats.running_mean = layer.running_mean;
  stats.running_var = layer.running_var;
  stats.epsilon = layer.epsilon;
  stats.momentum = layer.momentum;
  Var hn = bn_normalize(stats, h, mode);
  layer.running_mean = stats.running_mean;
  layer.running_var = stats.running_var;
  Var gamma_y = gather_rows(layer.gamma_table, labels);
  Var beta_y = gather_rows(layer.beta_table, labels);
  return add_sample_channel(mul_sample_channel(hn, gamma_y), beta_y);
}

LatentComposer::LatentComposer(std::size_t num_classes, std::size_t latent_dim)
    : e(Var::param(Tensor({num_classes, latent_dim}))),
      e_prime(Var::param(Tensor({num_classes, latent_dim}))) {}

Var compose_latent(const LatentComposer& comp, const Var& z,
                   const std::vector<std::size_t>& labels) {
  Var z2 = as_batch(z);
  if (labels.size() != z2.shape()[0]) {
    throw ShapeError("compose_latent: " + std::to_string(labels.size()) + " labels vs latent " +
                     z.value().shape_string());
  }
  if (z2.shape()[1] != comp.e.shape()[1]) {
    throw ShapeError("compose_latent: latent " + z.value().shape_string() + " vs embeddings " +
                     comp.e.value().shape_string());
  }
  Var ey = gather_rows(comp.e, labels);
  Var epy = gather_rows(comp.e_prime, labels);
  Var out = add(add(z2, ey), mul(z2, epy));
  return z.shape().size() == 1 ? reshape(out, {out.shape()[1]}) : out;
}

SpectralNormState::SpectralNormState(std::size_t rows, Rng& rng) {
  u = rng.normal_tensor({rows});
  double n = l2_norm(u);
  for (std::size_t i = 0; i < rows; ++i) u[i] /= n;
}

namespace {

// One u <- W W^T u power step; returns false on a zero matrix.
bool power_iterate(const Tensor& w, Tensor& u, Tensor& v) {
  std::size_t m = w.shape()[0], n = w.shape()[1];
  v = Tensor({n});
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w[i * n + j] * u[i];
    v[j] = s;
  }
  double nv = l2_norm(v);
  if (nv == 0.0) return false;
  for (std::size_t j = 0; j < n; ++j) v[j] /= nv;
  Tensor nu({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * v[j];
    nu[i] = s;
  }
  double nn = l2_norm(nu);
  if (nn == 0.0) return false;
  for (std::size_t i = 0; i < m; ++i) nu[i] /= nn;
  u = nu;
  return true;
}

// Runs the configured number of power iterations; returns sigma estimate and
// the final right vector, or 0 for a zero matrix.
double power_sigma(const Tensor& w, SpectralNormState& state, Tensor& v) {
  std::size_t m = w.shape()[0], n = w.shape()[1];
  if (state.u.size() != m) {
    throw ContractError("spectral norm state sized for " + std::to_string(state.u.size()) +
                        " rows, weight has " + std::to_string(m));
  }
  Tensor u = state.u;
  for (std::size_t it = 0; it < state.power_iterations_per_step; ++it) {
    if (!power_iterate(w, u, v)) return 0.0;
  }
  // v recomputed from the final u: sigma_hat = u^T W v, v = W^T u / ||W^T u||.
  v = Tensor({n});
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w[i * n + j] * u[i];
    v[j] = s;
  }
  double nv = l2_norm(v);
  if (nv == 0.0) return 0.0;
  for (std::size_t j = 0; j < n; ++j) v[j] /= nv;
  state.u = u;
  double sigma = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) sigma += u[i] * w[i * n + j] * v[j];
  return sigma;
}

}  // namespace

Tensor spectral_normalize(const Tensor& weight, SpectralNormState& state) {
  if (weight.shape().size() != 2) {
    throw ShapeError("spectral_normalize: weight must be 2-D, got " + weight.shape_string());
  }
  Tensor v;
  double sigma = power_sigma(weight, state, v);
  if (sigma == 0.0) return weight;
  Tensor out(weight.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weight[i] / sigma;
  return out;
}

Var spectral_normalize_var(const Var& weight, SpectralNormState& state) {
  if (weight.shape().size() != 2) {
    throw ShapeError("spectral_normalize: weight must be 2-D, got " +
                     weight.value().shape_string());
  }
  Tensor v;
  double sigma = power_sigma(weight.value(), state, v);
  if (sigma == 0.0) return weight;
  std::size_t m = weight.shape()[0], n = weight.shape()[1];
  Var u_row = Var::constant(Tensor({1, m}, state.u.vec()));
  Var v_col = Var::constant(Tensor({n, 1}, v.vec()));
  Var sigma_var = reshape(matmul(matmul(u_row, weight), v_col), {1});
  return scale(weight, reciprocal_op(sigma_var));
}

Var gradient_penalty(const std::function<Var(const Var&)>& discriminator, const Tensor& real_batch,
                     const Tensor& fake_batch, double lambda, Rng& rng) {
  check_same_shape(real_batch, fake_batch, "gradient_penalty");
  if (real_batch.rank() < 2) {
    throw ShapeError("gradient_penalty: batched input expected, got " + real_batch.shape_string());
  }
  std::size_t n = real_batch.shape().front();
  std::size_t inner = real_batch.size() / n;
  Tensor mixed(real_batch.shape());
  for (std::size_t s = 0; s < n; ++s) {
    double alpha = rng.uniform();
    for (std::size_t j = 0; j < inner; ++j) {
      std::size_t i = s * inner + j;
      mixed[i] = alpha * real_batch[i] + (1.0 - alpha) * fake_batch[i];
    }
  }
  Var x_hat = Var::param(std::move(mixed));
  Var logits = discriminator(x_hat);
  Var g = grad(sum_all(logits), {x_hat})[0];
  std::vector<std::size_t> inner_axes;
  for (std::size_t a = 1; a < real_batch.rank(); ++a) inner_axes.push_back(a);
  Var norms = sqrt_op(reduce_sum(mul(g, g), inner_axes));
  Var dev = add_scalar(norms, -1.0);
  return mul_scalar(mean_all(mul(dev, dev)), lambda);
}

ProjectionHead::ProjectionHead(std::size_t num_classes, std::size_t feature_dim, Rng& rng)
    : psi_weights(Var::param(rng.normal_tensor({feature_dim}, 0.0, 0.02))),
      label_embedding(Var::param(rng.normal_tensor({num_classes, feature_dim}, 0.0, 0.02))) {}

Var projection_logit(const ProjectionHead& head, const Var& phi,
                     const std::vector<std::size_t>& labels) {
  Var p2 = as_batch(phi);
  std::size_t f = head.psi_weights.shape()[0];
  if (p2.shape()[1] != f) {
    throw ShapeError("projection_logit: features " + phi.value().shape_string() + " vs psi [" +
                     std::to_string(f) + "]");
  }
  if (labels.size() != p2.shape()[0]) {
    throw ShapeError("projection_logit: label count " + std::to_string(labels.size()) +
                     " vs features " + phi.value().shape_string());
  }
  Var psi_term = reshape(matmul(p2, reshape(head.psi_weights, {f, 1})), {p2.shape()[0]});
  Var proj_term = reduce_sum(mul(p2, gather_rows(head.label_embedding, labels)), {1});
  return add(psi_term, proj_term);
}

}  // namespace smgan
