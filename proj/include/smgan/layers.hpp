#pragma once

#include <cstddef>
#include <functional>

#include "smgan/ops.hpp"
#include "smgan/random.hpp"

namespace smgan {

enum class Mode { kTrain, kEval };

/// Batch normalization with learnable per-channel scale/shift and running
/// statistics. Train mode normalizes with batch statistics and updates the
/// running averages; eval mode uses the running averages.
struct BatchNormLayer {
  Var gamma;  // [C], init 1
  Var beta;   // [C], init 0
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;
  double momentum = 0.99;

  explicit BatchNormLayer(std::size_t channels);
  std::size_t channels() const { return gamma.shape()[0]; }
};

/// Normalize-only path shared by plain/self-modulated/conditional batch norm:
/// (h - mu) / sqrt(var + eps), with running-stat bookkeeping in train mode.
Var bn_normalize(BatchNormLayer& layer, const Var& h, Mode mode);

Var bn_forward(BatchNormLayer& layer, const Var& h, Mode mode);

/// One-hidden-layer ReLU MLP mapping the latent to per-channel modulation:
/// V max(0, U z + b) + offset. One independent instance each for the scale
/// and the shift of a modulated layer.
struct SelfModulator {
  Var u;  // [hidden, d]
  Var b;  // [hidden]
  Var v;  // [C, hidden]
  double output_offset = 0.0;

  /// V = 0, U ~ N(0, 0.02), b = 0: the modulator is exactly `output_offset`
  /// at initialization, so a self-modulated layer starts as plain BN.
  static SelfModulator init(std::size_t channels, std::size_t latent_dim, std::size_t hidden,
                            double output_offset, Rng& rng);
};

/// z of shape [d] -> [C], or a batch [N,d] -> [N,C].
Var modulation_mlp(const SelfModulator& mod, const Var& z);

/// Self-modulated batch norm: per-sample gamma(z), beta(z) applied to the
/// batch-normalized activations. Uses `layer` only for statistics/epsilon.
Var sbn_forward(BatchNormLayer& layer, const SelfModulator& gamma_mod,
                const SelfModulator& beta_mod, const Var& h, const Var& z, Mode mode);

/// Label-conditional batch norm: per-class rows of gamma/beta tables.
struct ConditionalBNLayer {
  Var gamma_table;  // [num_classes, C], init 1
  Var beta_table;   // [num_classes, C], init 0
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;
  double momentum = 0.99;

  ConditionalBNLayer(std::size_t num_classes, std::size_t channels);
  std::size_t channels() const { return gamma_table.shape()[1]; }
};

Var cbn_forward(ConditionalBNLayer& layer, const Var& h, const std::vector<std::size_t>& labels,
                Mode mode);

/// Bilinear label/latent composition: z' = z + E(y) + z (.) E'(y).
struct LatentComposer {
  Var e;        // [num_classes, d], init 0
  Var e_prime;  // [num_classes, d], init 0

  LatentComposer(std::size_t num_classes, std::size_t latent_dim);
};

/// z of shape [N,d] with one label per row.
Var compose_latent(const LatentComposer& comp, const Var& z, const std::vector<std::size_t>& labels);

/// Persistent left-singular-vector estimate for power iteration.
struct SpectralNormState {
  Tensor u;  // [m], unit norm
  std::size_t power_iterations_per_step = 1;

  SpectralNormState() = default;
  SpectralNormState(std::size_t rows, Rng& rng);
};

/// Power-iteration spectral normalization of a 2-D weight; updates `state.u`
/// in place and returns W / sigma_hat. A zero matrix is returned unchanged.
Tensor spectral_normalize(const Tensor& weight, SpectralNormState& state);

/// Graph-connected variant for training: sigma_hat is computed from the
/// converged (u, v) pair held constant, so gradients flow through W alone.
Var spectral_normalize_var(const Var& weight, SpectralNormState& state);

/// WGAN-GP style penalty on interpolates between real and fake batches:
/// lambda * mean((||grad_xhat D(xhat)||_2 - 1)^2). Differentiable through to
/// the discriminator parameters.
Var gradient_penalty(const std::function<Var(const Var&)>& discriminator, const Tensor& real_batch,
                     const Tensor& fake_batch, double lambda, Rng& rng);

/// Projection-discriminator output head: psi(phi) + phi . E(y).
struct ProjectionHead {
  Var psi_weights;      // [F]
  Var label_embedding;  // [num_classes, F]

  ProjectionHead(std::size_t num_classes, std::size_t feature_dim, Rng& rng);
};

/// phi of shape [F] (single sample) or [N,F]; returns [1] or [N] logits.
Var projection_logit(const ProjectionHead& head, const Var& phi,
                     const std::vector<std::size_t>& labels);

}  // namespace smgan
