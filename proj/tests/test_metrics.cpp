#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "smgan/data.hpp"
#include "smgan/errors.hpp"
#include "smgan/metrics.hpp"
#include "smgan/random.hpp"

using namespace smgan;

namespace {

// PSD square root via the handwritten Jacobi eigensolver (oracle route,
// independent of the Eigen-backed implementation).
std::vector<double> oracle_sqrt(const std::vector<double>& a, std::size_t n) {
  std::vector<double> vecs;
  std::vector<double> ev = oracles::jacobi_eigh(a, n, vecs);
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        acc += vecs[i * n + k] * std::sqrt(std::max(0.0, ev[k])) * vecs[j * n + k];
      }
      s[i * n + j] = acc;
    }
  return s;
}

double oracle_frechet(const GaussianStats& a, const GaussianStats& b) {
  std::size_t f = a.mu.size();
  std::vector<double> sa(a.sigma.vec()), sb(b.sigma.vec());
  std::vector<double> ra = oracle_sqrt(sa, f);
  // inner = ra * sb * ra
  auto matmul_sq = [f](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> out(f * f, 0.0);
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j < f; ++j)
        for (std::size_t k = 0; k < f; ++k) out[i * f + j] += x[i * f + k] * y[k * f + j];
    return out;
  };
  std::vector<double> inner = matmul_sq(matmul_sq(ra, sb), ra);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i + 1; j < f; ++j) {
      double sym = 0.5 * (inner[i * f + j] + inner[j * f + i]);
      inner[i * f + j] = inner[j * f + i] = sym;
    }
  std::vector<double> vecs;
  std::vector<double> ev = oracles::jacobi_eigh(inner, f, vecs);
  double cross = 0.0;
  for (double e : ev) cross += std::sqrt(std::max(0.0, e));
  double out = 0.0;
  for (std::size_t j = 0; j < f; ++j) {
    double d = a.mu[j] - b.mu[j];
    out += d * d;
    out += sa[j * f + j] + sb[j * f + j];
  }
  return out - 2.0 * cross;
}

Tensor random_spd(std::size_t n, Rng& rng) {
  Tensor m = rng.normal_tensor({n, n});
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += m[k * n + i] * m[k * n + j];
      out[i * n + j] = s + (i == j ? 0.1 : 0.0);
    }
  return out;
}

}  // namespace

TEST_CASE("fit_gaussian hand case {(0,0),(2,2)}") {
  GaussianStats stats = fit_gaussian(Tensor({2, 2}, {0.0, 0.0, 2.0, 2.0}));
  CHECK(stats.mu[0] == 1.0);
  CHECK(stats.mu[1] == 1.0);
  for (std::size_t k = 0; k < 4; ++k) CHECK(stats.sigma[k] == 2.0);  // N-1 divisor
}

TEST_CASE("fit_gaussian of a constant sample has zero covariance") {
  GaussianStats stats = fit_gaussian(Tensor({5, 3}, std::vector<double>(15, 0.7)));
  for (std::size_t j = 0; j < 3; ++j) CHECK(stats.mu[j] == doctest::Approx(0.7));
  for (std::size_t k = 0; k < 9; ++k) CHECK(stats.sigma[k] == 0.0);
}

TEST_CASE("fit_gaussian on 1000 standard normal draws recovers (0, I)") {
  Rng rng(71);
  GaussianStats stats = fit_gaussian(rng.normal_tensor({1000, 2}));
  CHECK(std::abs(stats.mu[0]) < 0.15);
  CHECK(std::abs(stats.mu[1]) < 0.15);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double expect = i == j ? 1.0 : 0.0;
      CHECK(std::abs(stats.sigma[i * 2 + j] - expect) < 0.2);
    }
}

TEST_CASE("fit_gaussian needs at least two samples") {
  CHECK_THROWS_AS(fit_gaussian(Tensor({1, 2}, {1.0, 2.0})), ArgumentError);
}

TEST_CASE("matrix_sqrt_psd analytic cases") {
  Tensor s = matrix_sqrt_psd(Tensor({2, 2}, {4.0, 0.0, 0.0, 9.0}));
  CHECK(s[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s[3] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(s[1]) < 1e-12);

  Tensor id = matrix_sqrt_psd(Tensor({3, 3}, {1., 0., 0., 0., 1., 0., 0., 0., 1.}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(id[i * 3 + j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("matrix_sqrt_psd reconstructs random SPD inputs") {
  Rng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_spd(4, rng);
    Tensor s = matrix_sqrt_psd(a);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double ss = 0.0;
        for (std::size_t k = 0; k < 4; ++k) ss += s[i * 4 + k] * s[k * 4 + j];
        err += (ss - a[i * 4 + j]) * (ss - a[i * 4 + j]);
        norm += a[i * 4 + j] * a[i * 4 + j];
      }
    CHECK(std::sqrt(err) <= 1e-8 * std::sqrt(norm));
  }
}

TEST_CASE("matrix_sqrt_psd rejects strongly indefinite input") {
  CHECK_THROWS_AS(matrix_sqrt_psd(Tensor({2, 2}, {1.0, 0.0, 0.0, -1.0})), NumericalError);
}

TEST_CASE("frechet_distance analytic cases") {
  GaussianStats a{Tensor({1}, {0.0}), Tensor({1, 1}, {1.0})};
  GaussianStats b{Tensor({1}, {1.0}), Tensor({1, 1}, {1.0})};
  GaussianStats c{Tensor({1}, {0.0}), Tensor({1, 1}, {4.0})};
  CHECK(std::abs(frechet_distance(a, a)) < 1e-8);
  CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(frechet_distance(a, c) == doctest::Approx(1.0).epsilon(1e-7));  // 4+1-2*2
}

TEST_CASE("frechet_distance matches the Jacobi eigensolver oracle on SPD pairs") {
  Rng rng(79);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianStats a{rng.normal_tensor({3}), random_spd(3, rng)};
    GaussianStats b{rng.normal_tensor({3}), random_spd(3, rng)};
    double got = frechet_distance(a, b);
    double want = oracle_frechet(a, b);
    CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    // Symmetry in the arguments.
    CHECK(std::abs(got - frechet_distance(b, a)) < 1e-8);
    CHECK(got > 0.0);
  }
}

TEST_CASE("frechet_distance rejects dimension mismatch") {
  GaussianStats a{Tensor({1}, {0.0}), Tensor({1, 1}, {1.0})};
  GaussianStats b{Tensor({2}, {0.0, 0.0}), Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0})};
  CHECK_THROWS_AS(frechet_distance(a, b), ShapeError);
}

TEST_CASE("inception score surrogate analytic cases") {
  auto fx_with = [](std::size_t k, std::function<void(std::size_t, double*)> fill) {
    FeatureExtractor fx;
    fx.tag = "stub";
    fx.num_classes = k;
    fx.class_probs = [k, fill](const Tensor& samples) {
      std::size_t n = samples.shape()[0];
      Tensor probs({n, k});
      std::vector<double> row(k);
      for (std::size_t i = 0; i < n; ++i) {
        fill(i, row.data());
        for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = row[j];
      }
      return probs;
    };
    return fx;
  };
  Tensor samples({8, 1});

  SUBCASE("uniform classifier gives 1") {
    FeatureExtractor fx = fx_with(4, [](std::size_t, double* row) {
      for (int j = 0; j < 4; ++j) row[j] = 0.25;
    });
    CHECK(inception_score_surrogate(fx, samples) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant one-hot classifier gives 1") {
    FeatureExtractor fx = fx_with(4, [](std::size_t, double* row) {
      for (int j = 0; j < 4; ++j) row[j] = 0.0;
      row[0] = 1.0;
    });
    CHECK(inception_score_surrogate(fx, samples) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("one-hot covering K classes uniformly gives K") {
    FeatureExtractor fx = fx_with(4, [](std::size_t i, double* row) {
      for (int j = 0; j < 4; ++j) row[j] = 0.0;
      row[i % 4] = 1.0;
    });
    CHECK(inception_score_surrogate(fx, samples) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("non-normalized rows are rejected") {
    FeatureExtractor fx = fx_with(4, [](std::size_t, double* row) {
      for (int j = 0; j < 4; ++j) row[j] = 0.3;
    });
    CHECK_THROWS_AS(inception_score_surrogate(fx, samples), ContractError);
  }
  SUBCASE("missing probability head is rejected") {
    FeatureExtractor fx = make_identity_extractor({1});
    CHECK_THROWS_AS(inception_score_surrogate(fx, samples), ContractError);
  }
}

TEST_CASE("function_jacobian of a linear map returns the matrix") {
  Tensor a({3, 2}, {1.0, 2.0, -0.5, 0.25, 3.0, -1.0});
  auto f = [&](const Var& z) {
    return ops::matmul(z, ops::transpose2d(Var::constant(a)));  // [1,2] -> [1,3]
  };
  Tensor jac = function_jacobian(f, Tensor({2}, {0.7, -0.3}));
  REQUIRE(jac.shape() == Shape{3, 2});
  for (std::size_t i = 0; i < 6; ++i) CHECK(jac[i] == a[i]);
}

TEST_CASE("function_jacobian of tanh at zero is the identity") {
  auto f = [](const Var& z) { return ops::tanh_op(z); };
  Tensor jac = function_jacobian(f, Tensor({3}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(jac[i * 3 + j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("function_jacobian of a 2-layer MLP matches finite differences") {
  Rng rng(83);
  Tensor w1 = rng.normal_tensor({3, 5});
  Tensor w2 = rng.normal_tensor({5, 4});
  auto f = [&](const Var& z) {
    return ops::matmul(ops::tanh_op(ops::matmul(z, Var::constant(w1))), Var::constant(w2));
  };
  Tensor z = rng.normal_tensor({3});
  Tensor jac = function_jacobian(f, z);

  auto eval = [&](const std::vector<double>& zv) {
    Var out = f(Var::constant(Tensor({1, 3}, zv)));
    return out.value();
  };
  const double h = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> zp = z.vec(), zm = z.vec();
    zp[j] += h;
    zm[j] -= h;
    Tensor fp = eval(zp), fm = eval(zm);
    for (std::size_t i = 0; i < 4; ++i) {
      double fd = (fp[i] - fm[i]) / (2.0 * h);
      double denom = std::max({std::abs(fd), std::abs(jac[i * 3 + j]), 1e-6});
      CHECK(std::abs(jac[i * 3 + j] - fd) / denom < 1e-5);
    }
  }
}

TEST_CASE("condition_number_of linear diag(2,1) map is ln 2 for any batch") {
  Tensor a({2, 2}, {2.0, 0.0, 0.0, 1.0});
  auto f = [&](const Var& z) { return ops::matmul(z, Var::constant(a)); };
  Rng rng(89);
  ConditionScore score = condition_number_of(f, rng.normal_tensor({6, 2}));
  CHECK(score.mean_log_cond == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_FALSE(score.degenerate);
}

TEST_CASE("condition_number_of averages logs: cond e and e^2 give 1.5") {
  // f(z) = (0.5 z1^2, z2): Jacobian diag(z1, 1), condition z1 for z1 > 1.
  Tensor m1({2}, {1.0, 0.0}), m2({2}, {0.0, 1.0});
  auto f = [&](const Var& z) {
    using namespace smgan::ops;
    Var first = mul_scalar(mul(z, z), 0.5);
    return add(mul(first, Var::constant(Tensor({1, 2}, m1.vec()))),
               mul(z, Var::constant(Tensor({1, 2}, m2.vec()))));
  };
  double e = std::numbers::e;
  Tensor batch({2, 2}, {e, 0.3, e * e, -0.7});
  ConditionScore score = condition_number_of(f, batch);
  CHECK(score.mean_log_cond == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("condition_number_of is invariant under orthogonal output rotation") {
  Rng rng(91);
  Tensor a = rng.normal_tensor({2, 2});
  double th = 0.9;
  Tensor q({2, 2}, {std::cos(th), -std::sin(th), std::sin(th), std::cos(th)});
  auto f = [&](const Var& z) { return ops::matmul(z, Var::constant(a)); };
  auto g = [&](const Var& z) {
    return ops::matmul(ops::matmul(z, Var::constant(a)), Var::constant(q));
  };
  Tensor batch = rng.normal_tensor({4, 2});
  CHECK(condition_number_of(f, batch).mean_log_cond ==
        doctest::Approx(condition_number_of(g, batch).mean_log_cond).epsilon(1e-10));
}

TEST_CASE("condition_number_of flags rank-deficient Jacobians instead of discarding") {
  Tensor a({2, 2}, {1.0, 0.0, 0.0, 0.0});
  auto f = [&](const Var& z) { return ops::matmul(z, Var::constant(a)); };
  ConditionScore score = condition_number_of(f, Tensor({1, 2}, {0.5, 0.5}));
  CHECK(score.degenerate);
  CHECK(score.mean_log_cond == doctest::Approx(std::log(1.0 / 1e-12)).epsilon(1e-6));
}

TEST_CASE("condition_number_of matches the finite-difference + SVD oracle on an MLP") {
  Rng rng(97);
  Tensor w1 = rng.normal_tensor({2, 6});
  Tensor w2 = rng.normal_tensor({6, 3});
  auto f = [&](const Var& z) {
    return ops::matmul(ops::tanh_op(ops::matmul(z, Var::constant(w1))), Var::constant(w2));
  };
  Tensor batch = rng.normal_tensor({8, 2});
  ConditionScore score = condition_number_of(f, batch);

  const double h = 1e-6;
  double oracle = 0.0;
  for (std::size_t s = 0; s < 8; ++s) {
    Tensor fd_jac({3, 2});
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> zp{batch[s * 2], batch[s * 2 + 1]};
      std::vector<double> zm = zp;
      zp[j] += h;
      zm[j] -= h;
      Tensor fp = f(Var::constant(Tensor({1, 2}, zp))).value();
      Tensor fm = f(Var::constant(Tensor({1, 2}, zm))).value();
      for (std::size_t i = 0; i < 3; ++i) fd_jac[i * 2 + j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    std::vector<double> sv = oracles::jacobi_singular_values(fd_jac);
    oracle += std::log(sv.front() / sv.back());
  }
  oracle /= 8.0;
  CHECK(std::abs(score.mean_log_cond - oracle) / std::abs(oracle) < 1e-3);
}

TEST_CASE("generator_jacobian runs in eval mode and rejects train mode") {
  ArchSpec spec;
  spec.latent_dim = 4;
  spec.base_channels = 2;
  spec.num_blocks = 1;
  spec.out_h = spec.out_w = 4;
  spec.out_c = 1;
  spec.modulation.kind = ModKind::kSelf;
  spec.modulation.hidden = 3;
  Generator g = build_generator(spec, 55);
  Tensor z({4}, {0.1, -0.2, 0.3, 0.4});
  CHECK_THROWS_AS(generator_jacobian(g, z, Mode::kTrain), ContractError);
  Tensor jac = generator_jacobian(g, z);
  CHECK(jac.shape() == Shape{16, 4});
  CHECK(jac.all_finite());
  Rng rng(56);
  ConditionScore score = condition_number_score(g, rng.normal_tensor({2, 4}));
  CHECK(std::isfinite(score.mean_log_cond));
}

TEST_CASE("prd: identical feature sets give F8 = F1/8 = 1") {
  Rng rng(101);
  Tensor features = rng.normal_tensor({60, 2});
  PRDResult result = prd_curve(features, features, 10, 101, 3);
  CHECK(result.f8 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.f_inv8 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("prd: disjoint well-separated sets score near zero") {
  Rng rng(103);
  Tensor real({40, 2}), fake({40, 2});
  for (std::size_t i = 0; i < 40; ++i) {
    real[i * 2] = rng.normal(0.0, 0.05);
    real[i * 2 + 1] = rng.normal(0.0, 0.05);
    fake[i * 2] = rng.normal(50.0, 0.05);
    fake[i * 2 + 1] = rng.normal(50.0, 0.05);
  }
  PRDResult result = prd_curve(real, fake, 8, 101, 5);
  CHECK(result.f8 <= 0.05);
  CHECK(result.f_inv8 <= 0.05);
}

TEST_CASE("prd hand-histogram fixture matches direct formula evaluation") {
  std::vector<double> p{0.5, 0.5, 0.0}, q{0.5, 0.0, 0.5};
  std::size_t num_angles = 101;
  PRDResult result = prd_from_histograms(p, q, num_angles);
  const double eps = 1e-10;
  for (std::size_t i = 0; i < num_angles; ++i) {
    double angle = eps + (std::numbers::pi / 2.0 - 2.0 * eps) * static_cast<double>(i) /
                             static_cast<double>(num_angles - 1);
    double lambda = std::tan(angle);
    double alpha = 0.0;
    for (std::size_t j = 0; j < 3; ++j) alpha += std::min(lambda * p[j], q[j]);
    CHECK(std::abs(result.precisions[i] - std::min(1.0, alpha)) <= 1e-10);
    CHECK(std::abs(result.recalls[i] - std::min(1.0, alpha / lambda)) <= 1e-10);
    CHECK(result.precisions[i] >= 0.0);
    CHECK(result.precisions[i] <= 1.0);
    CHECK(result.recalls[i] >= 0.0);
    CHECK(result.recalls[i] <= 1.0);
  }
}

TEST_CASE("prd swap property: exchanging histograms swaps F8 and F1/8") {
  std::vector<double> p{0.6, 0.3, 0.1, 0.0}, q{0.1, 0.2, 0.3, 0.4};
  PRDResult ab = prd_from_histograms(p, q);
  PRDResult ba = prd_from_histograms(q, p);
  CHECK(ab.f8 == doctest::Approx(ba.f_inv8).epsilon(1e-9));
  CHECK(ab.f_inv8 == doctest::Approx(ba.f8).epsilon(1e-9));
}

TEST_CASE("prd input validation") {
  Rng rng(107);
  Tensor small = rng.normal_tensor({5, 2});
  CHECK_THROWS_AS(prd_curve(small, small, 6, 101, 1), ArgumentError);
  CHECK_THROWS_AS(prd_from_histograms({}, {}, 101), ArgumentError);
  CHECK_THROWS_AS(prd_from_histograms({0.5, 0.5}, {1.0}, 101), ArgumentError);
}

TEST_CASE("identity extractor returns raw coordinates") {
  FeatureExtractor fx = make_identity_extractor({1, 1, 2});
  CHECK(fx.feature_dim == 2);
  Tensor x({1, 1, 1, 2}, {1.5, -2.0});
  Tensor out = fx.embed(x);
  CHECK(out.shape() == Shape{1, 2});
  CHECK(out[0] == 1.5);
  CHECK(out[1] == -2.0);
}

TEST_CASE("trained classifier extractor separates ring modes and is frozen") {
  Dataset ds = ring_of_gaussians(8, 1.0, 0.05, 202);
  FeatureExtractor fx = make_trained_classifier_extractor(ds, 202);  // throws below 0.9 accuracy
  CHECK(fx.num_classes == 8);

  Batch probe = ds.sample_test(16);
  Tensor e1 = fx.embed(probe.samples);
  Tensor e2 = fx.embed(probe.samples);
  REQUIRE(e1.shape() == e2.shape());
  for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == e2[i]);

  double is = inception_score_surrogate(fx, probe.samples);
  CHECK(is >= 1.0);
  CHECK(is <= static_cast<double>(fx.num_classes));
}

TEST_CASE("make_feature_extractor dispatches by kind") {
  Dataset ds = ring_of_gaussians(4, 1.0, 0.1, 5);
  FeatureExtractor fx = make_feature_extractor("identity", ds, 5);
  CHECK(fx.tag == "identity");
  CHECK_THROWS_AS(make_feature_extractor("inception", ds, 5), ArgumentError);
}
