#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smgan/data.hpp"
#include "smgan/nets.hpp"
#include "smgan/tensor.hpp"

namespace smgan {

struct GaussianStats {
  Tensor mu;     // [F]
  Tensor sigma;  // [F, F], symmetric
};

/// Sample mean and unbiased covariance of row features [N, F]; N >= 2.
GaussianStats fit_gaussian(const Tensor& features);

/// Symmetric PSD square root via eigendecomposition; eigenvalues below
/// -1e-8 * scale reject the input, small negatives are clamped to zero.
Tensor matrix_sqrt_psd(const Tensor& a);

/// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)), cross term through the
/// symmetrized product sqrt(Sa) Sb sqrt(Sa) with 1e-10 jitter.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Deterministic embedding of samples into a fixed feature space, optionally
/// with a class-probability head (needed by the IS surrogate).
struct FeatureExtractor {
  std::string tag;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::function<Tensor(const Tensor& samples)> embed;        // [N,...] -> [N,F]
  std::function<Tensor(const Tensor& samples)> class_probs;  // [N,...] -> [N,K] rows on simplex
};

/// Raw coordinates, flattened: the 2-D synthetic regime where FID is exactly
/// the Gaussian moment-matching distance.
FeatureExtractor make_identity_extractor(const Shape& sample_shape);

/// Trains a small convnet classifier on the labeled dataset and embeds via
/// its penultimate layer; refuses to build below 0.9 held-out accuracy.
FeatureExtractor make_trained_classifier_extractor(Dataset& dataset, std::uint64_t seed);

FeatureExtractor make_feature_extractor(const std::string& kind, Dataset& dataset,
                                        std::uint64_t seed);

/// exp(mean_x KL(p(y|x) || mean_x p(y|x))). Requires a probability head.
double inception_score_surrogate(const FeatureExtractor& classifier, const Tensor& samples);

/// Dense Jacobian [out_dim, d] of any differentiable map f: [1,d] -> any
/// shape, by one backward pass per output component.
Tensor function_jacobian(const std::function<Var(const Var&)>& f, const Tensor& z);

/// Dense Jacobian d G(z)_i / d z_j of one latent (z of shape [d]) as
/// [out_dim, d]; the generator runs in eval mode (frozen statistics).
Tensor generator_jacobian(Generator& g, const Tensor& z, Mode mode = Mode::kEval);

struct ConditionScore {
  double mean_log_cond = 0.0;
  bool degenerate = false;  // some sigma_min hit the 1e-12 floor
};

/// Mean over the batch [N, d] of ln(sigma_max / sigma_min) of the per-sample
/// Jacobian, sigma_min floored at 1e-12.
ConditionScore condition_number_of(const std::function<Var(const Var&)>& f, const Tensor& z_batch);
ConditionScore condition_number_score(Generator& g, const Tensor& z_batch);

struct PRDResult {
  std::vector<double> precisions;
  std::vector<double> recalls;
  double f8 = 0.0;
  double f_inv8 = 0.0;
};

/// PRD curve from explicit cluster histograms over a symmetric angular
/// lambda grid; exposed separately so the curve math is testable without
/// clustering.
PRDResult prd_from_histograms(const std::vector<double>& p, const std::vector<double>& q,
                              std::size_t num_angles = 1001);

/// Joint k-means over pooled real/fake features, then the histogram curve.
PRDResult prd_curve(const Tensor& real_features, const Tensor& fake_features,
                    std::size_t num_clusters = 20, std::size_t num_angles = 1001,
                    std::uint64_t seed = 0);

}  // namespace smgan
