#include "smgan/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "smgan/errors.hpp"
#include "smgan/optim.hpp"

namespace smgan {

using namespace smgan::ops;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> as_eigen(const Tensor& t, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const RowMat>(t.vec().data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

Tensor from_eigen(const RowMat& m) {
  Tensor out({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
  return out;
}

Tensor flatten_batch(const Tensor& samples) {
  if (samples.rank() < 2) throw ShapeError("features: batched input expected");
  std::size_t n = samples.shape()[0];
  return Tensor({n, samples.size() / n}, samples.vec());
}

double f_score(double beta, double precision, double recall) {
  double denom = beta * beta * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta * beta) * precision * recall / denom;
}

}  // namespace

GaussianStats fit_gaussian(const Tensor& features) {
  if (features.rank() != 2) {
    throw ShapeError("fit_gaussian: features must be [N,F], got " + features.shape_string());
  }
  std::size_t n = features.shape()[0], f = features.shape()[1];
  if (n < 2) throw ArgumentError("fit_gaussian: need at least 2 samples, got " + std::to_string(n));

  GaussianStats stats{Tensor({f}), Tensor({f, f})};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) stats.mu[j] += features[i * f + j];
  for (std::size_t j = 0; j < f; ++j) stats.mu[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < f; ++a) {
      double da = features[i * f + a] - stats.mu[a];
      for (std::size_t b = 0; b < f; ++b) {
        stats.sigma[a * f + b] += da * (features[i * f + b] - stats.mu[b]);
      }
    }
  }
  for (std::size_t k = 0; k < f * f; ++k) stats.sigma[k] /= static_cast<double>(n - 1);
  return stats;
}

Tensor matrix_sqrt_psd(const Tensor& a) {
  if (a.rank() != 2 || a.shape()[0] != a.shape()[1]) {
    throw ShapeError("matrix_sqrt_psd: square matrix expected, got " + a.shape_string());
  }
  std::size_t f = a.shape()[0];
  RowMat m = as_eigen(a, f, f);
  RowMat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<RowMat> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("matrix_sqrt_psd: eigensolver failed");
  Eigen::VectorXd evals = es.eigenvalues();
  double scale = std::max(1.0, std::abs(evals.maxCoeff()));
  if (evals.minCoeff() < -1e-8 * scale) {
    throw NumericalError("matrix_sqrt_psd: input strongly indefinite (lambda_min " +
                         std::to_string(evals.minCoeff()) + ")");
  }
  Eigen::VectorXd roots = evals.cwiseMax(0.0).cwiseSqrt();
  RowMat s = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
  s = 0.5 * (s + s.transpose());
  return from_eigen(s);
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mu.shape() != b.mu.shape() || a.sigma.shape() != b.sigma.shape()) {
    throw ShapeError("frechet_distance: dimension mismatch, " + a.mu.shape_string() + " vs " +
                     b.mu.shape_string());
  }
  std::size_t f = a.mu.size();
  RowMat sa = as_eigen(a.sigma, f, f);
  RowMat sb = as_eigen(b.sigma, f, f);
  RowMat jitter = 1e-10 * RowMat::Identity(f, f);

  Tensor root_a = matrix_sqrt_psd(from_eigen(sa + jitter));
  RowMat ra = as_eigen(root_a, f, f);
  RowMat inner = ra * sb * ra;
  Tensor cross = matrix_sqrt_psd(from_eigen(inner + jitter));

  double mean_term = 0.0;
  for (std::size_t j = 0; j < f; ++j) {
    double d = a.mu[j] - b.mu[j];
    mean_term += d * d;
  }
  double trace_term = sa.trace() + sb.trace() - 2.0 * as_eigen(cross, f, f).trace();
  return mean_term + trace_term;
}

FeatureExtractor make_identity_extractor(const Shape& sample_shape) {
  std::size_t f = shape_numel(sample_shape);
  FeatureExtractor fx;
  fx.tag = "identity";
  fx.feature_dim = f;
  fx.embed = [](const Tensor& samples) { return flatten_batch(samples); };
  return fx;
}

namespace {

/// Small convnet classifier: two stride-2 convs, a penultimate linear
/// embedding, and a softmax head.
struct Classifier {
  Var k1, b1, k2, b2;    // conv stages
  Var w_embed, b_embed;  // penultimate linear, feature_dim wide
  Var w_out, b_out;      // class logits
  Shape sample_shape;
  std::size_t flat_dim = 0;

  std::vector<Var> parameters() { return {k1, b1, k2, b2, w_embed, b_embed, w_out, b_out}; }

  Var embed(const Var& x) {
    Var h = leaky_relu(add_channel(conv2d(x, k1, 2, Padding::kSame), b1));
    h = leaky_relu(add_channel(conv2d(h, k2, 2, Padding::kSame), b2));
    std::size_t n = h.shape()[0];
    Var flat = reshape(h, {n, flat_dim});
    return relu(linear(flat, w_embed, b_embed));
  }
  Var logits(const Var& x) { return linear(embed(x), w_out, b_out); }
};

Tensor softmax_rows(const Tensor& logits) {
  std::size_t n = logits.shape()[0], k = logits.shape()[1];
  Tensor probs(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits[i * k + j] - mx);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(logits[i * k + j] - mx) / z;
  }
  return probs;
}

Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels) {
  std::size_t n = logits.shape()[0], k = logits.shape()[1];
  // Row-max shift (detached) keeps exp in range without changing gradients.
  Tensor shift({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits.value()[i * k + j]);
    for (std::size_t j = 0; j < k; ++j) shift[i * k + j] = mx;
  }
  Var shifted = sub(logits, Var::constant(shift));
  Var lse = log_op(reduce_sum(exp_op(shifted), {1}));
  Tensor onehot({n, k});
  for (std::size_t i = 0; i < n; ++i) onehot[i * k + labels[i]] = 1.0;
  Var picked = reduce_sum(mul(shifted, Var::constant(onehot)), {1});
  return mean_all(sub(lse, picked));
}

}  // namespace

FeatureExtractor make_trained_classifier_extractor(Dataset& dataset, std::uint64_t seed) {
  const Shape& ss = dataset.sample_shape();
  if (ss.size() != 3) {
    throw ConfigError("trained_classifier extractor expects HxWxC samples, got " +
                      shape_str(ss));
  }
  std::size_t k = dataset.num_classes();
  if (k < 2) throw ConfigError("trained_classifier extractor needs >= 2 classes");

  const std::size_t c1 = 8, c2 = 16, embed_dim = 32;
  Rng rng(Rng::derive(seed, 7));
  auto clf = std::make_shared<Classifier>();
  clf->sample_shape = ss;
  clf->k1 = Var::param(rng.normal_tensor({3, 3, ss[2], c1}, 0.0, 0.1));
  clf->b1 = Var::param(Tensor({c1}));
  clf->k2 = Var::param(rng.normal_tensor({3, 3, c1, c2}, 0.0, 0.1));
  clf->b2 = Var::param(Tensor({c2}));
  std::size_t sh = (ss[0] + 3) / 4, sw = (ss[1] + 3) / 4;  // two stride-2 stages, same padding
  clf->flat_dim = sh * sw * c2;
  clf->w_embed = Var::param(rng.normal_tensor({clf->flat_dim, embed_dim}, 0.0, 0.1));
  clf->b_embed = Var::param(Tensor({embed_dim}));
  clf->w_out = Var::param(rng.normal_tensor({embed_dim, k}, 0.0, 0.1));
  clf->b_out = Var::param(Tensor({k}));

  AdamState opt(0.9, 0.999, 1e-3);
  std::vector<Var> params = clf->parameters();
  for (int step = 0; step < 400; ++step) {
    Batch batch = dataset.sample_train(64);
    Var loss = cross_entropy(clf->logits(Var::constant(batch.samples)), batch.labels);
    backward(loss);
    adam_step(opt, params);
  }

  Batch held_out = dataset.sample_test(256);
  Tensor probs = softmax_rows(clf->logits(Var::constant(held_out.samples)).value());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < held_out.labels.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs[i * k + j] > probs[i * k + arg]) arg = j;
    if (arg == held_out.labels[i]) ++correct;
  }
  double accuracy = static_cast<double>(correct) / static_cast<double>(held_out.labels.size());
  if (accuracy < 0.9) {
    throw ContractError("trained_classifier extractor reached only " + std::to_string(accuracy) +
                        " held-out accuracy (< 0.9); refusing to build a meaningless embedding");
  }

  FeatureExtractor fx;
  fx.tag = "trained_classifier";
  fx.feature_dim = embed_dim;
  fx.num_classes = k;
  fx.embed = [clf](const Tensor& samples) { return clf->embed(Var::constant(samples)).value(); };
  fx.class_probs = [clf](const Tensor& samples) {
    return softmax_rows(clf->logits(Var::constant(samples)).value());
  };
  return fx;
}

FeatureExtractor make_feature_extractor(const std::string& kind, Dataset& dataset,
                                        std::uint64_t seed) {
  if (kind == "identity") return make_identity_extractor(dataset.sample_shape());
  if (kind == "trained_classifier") return make_trained_classifier_extractor(dataset, seed);
  throw ArgumentError("unknown feature extractor '" + kind +
                      "' (expected identity|trained_classifier)");
}

double inception_score_surrogate(const FeatureExtractor& classifier, const Tensor& samples) {
  if (!classifier.class_probs) {
    throw ContractError("inception_score_surrogate: extractor '" + classifier.tag +
                        "' has no class-probability head");
  }
  Tensor probs = classifier.class_probs(samples);
  if (probs.rank() != 2) throw ContractError("inception_score_surrogate: probs must be [N,K]");
  std::size_t n = probs.shape()[0], k = probs.shape()[1];
  std::vector<double> marginal(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (probs[i * k + j] < 0.0) {
        throw ContractError("inception_score_surrogate: negative probability");
      }
      row += probs[i * k + j];
    }
    if (std::abs(row - 1.0) > 1e-6) {
      throw ContractError("inception_score_surrogate: row " + std::to_string(i) +
                          " sums to " + std::to_string(row) + ", not a distribution");
    }
    for (std::size_t j = 0; j < k; ++j) marginal[j] += probs[i * k + j];
  }
  for (double& m : marginal) m /= static_cast<double>(n);

  double mean_kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double kl = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double p = probs[i * k + j];
      if (p > 0.0) kl += p * std::log(p / marginal[j]);
    }
    mean_kl += kl;
  }
  return std::exp(mean_kl / static_cast<double>(n));
}

Tensor function_jacobian(const std::function<Var(const Var&)>& f, const Tensor& z) {
  if (z.rank() != 1) {
    throw ShapeError("function_jacobian: latent must be 1-D, got " + z.shape_string());
  }
  std::size_t d = z.shape()[0];
  Var z_var = Var::param(Tensor({1, d}, z.vec()));
  Var out = f(z_var);
  std::size_t out_dim = out.value().size();
  Var flat = reshape(out, {out_dim});

  Tensor jac({out_dim, d});
  for (std::size_t i = 0; i < out_dim; ++i) {
    Tensor pick({out_dim});
    pick[i] = 1.0;
    backward(sum_all(mul(flat, Var::constant(pick))));
    for (std::size_t j = 0; j < d; ++j) jac[i * d + j] = z_var.grad()[j];
  }
  return jac;
}

Tensor generator_jacobian(Generator& g, const Tensor& z, Mode mode) {
  if (mode == Mode::kTrain) {
    throw ContractError(
        "generator_jacobian: train-mode batch statistics couple samples; use eval mode");
  }
  if (z.rank() != 1 || z.shape()[0] != g.spec.latent_dim) {
    throw ShapeError("generator_jacobian: latent " + z.shape_string() + " vs latent_dim " +
                     std::to_string(g.spec.latent_dim));
  }
  std::vector<std::size_t> labels;
  if (g.composer) labels.assign(1, 0);
  return function_jacobian(
      [&](const Var& zv) { return g.forward(zv, labels, Mode::kEval); }, z);
}

ConditionScore condition_number_of(const std::function<Var(const Var&)>& f,
                                   const Tensor& z_batch) {
  if (z_batch.rank() != 2 || z_batch.shape()[0] == 0) {
    throw ArgumentError("condition_number_score: non-empty [N,d] latent batch expected, got " +
                        z_batch.shape_string());
  }
  const double floor = 1e-12;
  std::size_t n = z_batch.shape()[0], d = z_batch.shape()[1];
  ConditionScore score;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor z({d}, {z_batch.vec().begin() + i * d, z_batch.vec().begin() + (i + 1) * d});
    Tensor jac = function_jacobian(f, z);
    RowMat m = as_eigen(jac, jac.shape()[0], jac.shape()[1]);
    Eigen::JacobiSVD<RowMat> svd(m);
    double smax = svd.singularValues().maxCoeff();
    double smin = svd.singularValues().minCoeff();
    if (smin < floor) {
      score.degenerate = true;
      smin = floor;
    }
    if (smax < floor) smax = floor;  // fully zero Jacobian: cond pinned to 1
    score.mean_log_cond += std::log(smax / smin);
  }
  score.mean_log_cond /= static_cast<double>(n);
  return score;
}

ConditionScore condition_number_score(Generator& g, const Tensor& z_batch) {
  std::vector<std::size_t> labels;
  if (g.composer) labels.assign(1, 0);
  return condition_number_of(
      [&](const Var& zv) { return g.forward(zv, labels, Mode::kEval); }, z_batch);
}

PRDResult prd_from_histograms(const std::vector<double>& p, const std::vector<double>& q,
                              std::size_t num_angles) {
  if (p.size() != q.size() || p.empty()) {
    throw ArgumentError("prd_from_histograms: histograms must be non-empty and equal length");
  }
  if (num_angles < 2) throw ArgumentError("prd_from_histograms: need >= 2 angles");
  const double eps = 1e-10;
  PRDResult result;
  result.precisions.reserve(num_angles);
  result.recalls.reserve(num_angles);
  for (std::size_t i = 0; i < num_angles; ++i) {
    double angle = eps + (std::numbers::pi / 2.0 - 2.0 * eps) * static_cast<double>(i) /
                             static_cast<double>(num_angles - 1);
    double lambda = std::tan(angle);
    double alpha = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) alpha += std::min(lambda * p[j], q[j]);
    double precision = std::min(1.0, alpha);
    double recall = std::min(1.0, alpha / lambda);
    result.precisions.push_back(precision);
    result.recalls.push_back(recall);
    result.f8 = std::max(result.f8, f_score(8.0, precision, recall));
    result.f_inv8 = std::max(result.f_inv8, f_score(1.0 / 8.0, precision, recall));
  }
  return result;
}

namespace {

/// Joint k-means (k-means++ seeding, Lloyd iterations) over pooled rows.
std::vector<std::size_t> kmeans_assign(const Tensor& points, std::size_t k, std::uint64_t seed) {
  std::size_t n = points.shape()[0], f = points.shape()[1];
  Rng rng(Rng::derive(seed, 17));
  auto dist2 = [&](std::size_t i, const std::vector<double>& center) {
    double s = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      double d = points[i * f + j] - center[j];
      s += d * d;
    }
    return s;
  };

  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  std::size_t first = rng.integer(n);
  centers.push_back({points.vec().begin() + first * f, points.vec().begin() + (first + 1) * f});
  std::vector<double> best(n, 0.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = dist2(i, centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) best[i] = std::min(best[i], dist2(i, centers[c]));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform(0.0, total);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.integer(n);
    }
    centers.push_back({points.vec().begin() + pick * f, points.vec().begin() + (pick + 1) * f});
  }

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double bd = dist2(i, centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = dist2(i, centers[c]);
        if (d < bd) {
          bd = d;
          arg = c;
        }
      }
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(f, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < f; ++j) sums[assign[i]][j] += points[i * f + j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its old center
      for (std::size_t j = 0; j < f; ++j) centers[c][j] = sums[c][j] / counts[c];
    }
  }
  return assign;
}

}  // namespace

PRDResult prd_curve(const Tensor& real_features, const Tensor& fake_features,
                    std::size_t num_clusters, std::size_t num_angles, std::uint64_t seed) {
  Tensor real = flatten_batch(real_features);
  Tensor fake = flatten_batch(fake_features);
  if (real.shape()[1] != fake.shape()[1]) {
    throw ShapeError("prd_curve: feature dims differ, " + real.shape_string() + " vs " +
                     fake.shape_string());
  }
  std::size_t nr = real.shape()[0], nf = fake.shape()[0];
  if (nr == 0 || nf == 0) throw ArgumentError("prd_curve: both feature sets must be non-empty");
  if (num_clusters > nr || num_clusters > nf) {
    throw ArgumentError("prd_curve: " + std::to_string(num_clusters) +
                        " clusters exceed sample count");
  }

  std::size_t f = real.shape()[1];
  Tensor pooled({nr + nf, f});
  for (std::size_t i = 0; i < nr * f; ++i) pooled[i] = real[i];
  for (std::size_t i = 0; i < nf * f; ++i) pooled[nr * f + i] = fake[i];
  std::vector<std::size_t> assign = kmeans_assign(pooled, num_clusters, seed);

  std::vector<double> p(num_clusters, 0.0), q(num_clusters, 0.0);
  for (std::size_t i = 0; i < nr; ++i) p[assign[i]] += 1.0 / static_cast<double>(nr);
  for (std::size_t i = 0; i < nf; ++i) q[assign[nr + i]] += 1.0 / static_cast<double>(nf);
  return prd_from_histograms(p, q, num_angles);
}

}  // namespace smgan
