#include <cmath>

#include <gtest/gtest.h>

#include "bwvi/diagnostics.hpp"
#include "bwvi/errors.hpp"
#include "bwvi/optimizers.hpp"
#include "support.hpp"

using namespace bwvi;
using namespace bwvi::test;

namespace {

const double kGolden = 0.5 * (1.0 + std::sqrt(5.0));

GradientEstimate zero_grad(Eigen::Index d, Geometry g) {
  return {Vector::Zero(d), Matrix::Zero(d, d), g, 0};
}

NoiseBatch unused(Eigen::Index d) { return NoiseBatch::draw({0, 0, 0}, d, 1); }

// Parameter distance over (m, tril C).
double param_dist_sq(const GaussianVariational& a, const GaussianVariational& b) {
  return (a.mean() - b.mean()).squaredNorm() + (a.scale() - b.scale()).squaredNorm();
}

}  // namespace

TEST(EntropyProx, Examples) {
  Matrix c = Matrix::Zero(1, 1);
  EXPECT_DOUBLE_EQ(entropy_prox(c, 1.0)(0, 0), 1.0);
  c(0, 0) = 3.0;
  EXPECT_DOUBLE_EQ(entropy_prox(c, 4.0)(0, 0), 4.0);
  c(0, 0) = 0.7;
  EXPECT_NEAR(entropy_prox(c, 1e-16)(0, 0), 0.7, 1e-8);
}

TEST(EntropyProx, KeepsOffDiagonalAndRepairsDiagonal) {
  Matrix c(2, 2);
  c << -5.0, 0.0, 0.4, -1e-3;
  const Matrix out = entropy_prox(c, 0.01);
  EXPECT_EQ(out(1, 0), 0.4);
  EXPECT_EQ(out(0, 1), 0.0);
  EXPECT_GT(out(0, 0), 0.0);
  EXPECT_GT(out(1, 1), 0.0);
  // Scalar optimality c'^2 - c c' - gamma = 0.
  for (int i = 0; i < 2; ++i)
    EXPECT_NEAR(out(i, i) * out(i, i) - c(i, i) * out(i, i), 0.01, 1e-15);
  EXPECT_THROW(entropy_prox(c, 0.0), InvalidParameters);
}

TEST(EntropyProx, StableForVeryNegativeDiagonal) {
  Matrix c = Matrix::Constant(1, 1, -1e8);
  const double out = entropy_prox(c, 1.0)(0, 0);
  EXPECT_NEAR(out, 1e-8, 1e-20);
}

TEST(JkoEntropy, Examples) {
  EXPECT_LE((jko_entropy(Matrix::Identity(3, 3), 1e-16).data() - Matrix::Identity(3, 3)).norm(),
            1e-8);
  EXPECT_NEAR(jko_entropy(Matrix::Constant(1, 1, 0.81), 0.1).data()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(jko_entropy(Matrix::Identity(1, 1), 1.0).data()(0, 0), 1.0 + kGolden, 1e-14);
}

TEST(JkoEntropy, MinimizesProximalObjective) {
  // Scalar H(s) + W2^2 / (2 gamma) = -1/2 log s + (sqrt(s) - sqrt(s0))^2 / (2 gamma)
  const double s0 = 0.6, gamma = 0.3;
  const auto objective = [&](double s) {
    return -0.5 * std::log(s) + std::pow(std::sqrt(s) - std::sqrt(s0), 2) / (2.0 * gamma);
  };
  const double got = jko_entropy(Matrix::Constant(1, 1, s0), gamma).data()(0, 0);
  for (double ds : {1e-4, -1e-4, 1e-2, -1e-2})
    EXPECT_LT(objective(got), objective(got + ds));
}

TEST(JkoEntropy, RejectsAsymmetric) {
  Matrix a(2, 2);
  a << 1, 0.5, 0, 1;
  EXPECT_THROW(jko_entropy(a, 0.1), NotSymmetric);
}

TEST(SpgdUpdate, ZeroGradientRunsProx) {
  const auto q = GaussianVariational::isotropic(1, 1.0);
  const auto out = spgd_update(q, zero_grad(1, Geometry::ParamScale), 1.0);
  EXPECT_EQ(out.mean(), q.mean());
  EXPECT_NEAR(out.scale()(0, 0), kGolden, 1e-15);
}

TEST(SpbwgdUpdate, ZeroGradientRunsJko) {
  const auto q = GaussianVariational::isotropic(1, 1.0);
  const auto out = spbwgd_update(q, zero_grad(1, Geometry::BWCovariance), 1.0);
  EXPECT_EQ(out.mean(), q.mean());
  EXPECT_NEAR(out.covariance()(0, 0), 0.5 * (3.0 + std::sqrt(5.0)), 1e-14);
}

TEST(Steps, VanishingStepLeavesIterate) {
  const LogisticRidgePotential t(toy_logistic_dataset(30, 4, 1), 1.0);
  std::mt19937_64 rng(3);
  const auto q = random_gaussian(rng, 4);
  const auto noise = NoiseBatch::draw({1, 0, 0}, 4, 8);
  for (auto step : {&spgd_step, &spbwgd_step}) {
    const auto out = step(q, t, noise, 1e-16, EstimatorKind::BonnetPrice);
    EXPECT_LE((out.mean() - q.mean()).norm(), 1e-8);
    EXPECT_LE((out.covariance() - q.covariance()).norm(), 1e-8);
  }
}

TEST(Steps, FixedPointAtOptimum) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = make_random_quadratic(1 + rep % 7, std::exp(u(rng) * std::log(100.0)), rep);
    const auto q_star = quadratic_optimum(t);
    const double gamma = (0.01 + 0.99 * u(rng)) / t.metadata().smoothness;
    const auto noise = unused(t.dim());
    for (auto step : {&spgd_step, &spbwgd_step}) {
      const auto out = step(q_star, t, noise, gamma, EstimatorKind::Exact);
      const double tol = 1e-10 * (1.0 + q_star.covariance().norm() + q_star.mean().norm());
      ASSERT_LE((out.mean() - q_star.mean()).norm(), tol);
      ASSERT_LE((out.covariance() - q_star.covariance()).norm(), tol);
    }
  }
}

TEST(Steps, SpbwgdHandlesNonSymmetricGradient) {
  const QuadraticPotential t = make_random_quadratic(3, 4.0, 1);
  const auto q = GaussianVariational::isotropic(3, 0.5);
  for (std::uint64_t it = 0; it < 50; ++it) {
    const auto out = spbwgd_step(q, t, NoiseBatch::draw({2, 0, it}, 3, 1), 0.05,
                                 EstimatorKind::BonnetReparam);
    ASSERT_GT(out.scale().diagonal().minCoeff(), 0.0);
  }
}

TEST(Steps, SpgdParameterDistanceDominatesW2) {
  const QuadraticPotential t = make_random_quadratic(4, 10.0, 2);
  const auto q_star = quadratic_optimum(t);
  auto q = GaussianVariational::isotropic(4, 0.34);
  for (std::uint64_t it = 0; it < 300; ++it) {
    q = spgd_step(q, t, NoiseBatch::draw({3, 0, it}, 4, 8), 0.01);
    ASSERT_GE(param_dist_sq(q, q_star), w2_distance_sq(q, q_star) - 1e-10);
  }
}

TEST(NonExpansive, JkoAndProx) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index d = 1 + rep % 5;
    const auto p = random_gaussian(rng, d);
    const auto q = random_gaussian(rng, d);
    for (double gamma : {0.01, 0.1, 1.0}) {
      const GaussianVariational jp(p.mean(), jko_entropy(p.covariance(), gamma).factor());
      const GaussianVariational jq(q.mean(), jko_entropy(q.covariance(), gamma).factor());
      ASSERT_LE(std::sqrt(w2_distance_sq(jp, jq)), std::sqrt(w2_distance_sq(p, q)) + 1e-10);
      const Matrix a = tril(gaussian_matrix(rng, d, d));
      const Matrix b = tril(gaussian_matrix(rng, d, d));
      ASSERT_LE((entropy_prox(a, gamma) - entropy_prox(b, gamma)).norm(), (a - b).norm() + 1e-12);
    }
  }
}

TEST(Run, ZeroIterations) {
  const QuadraticPotential t = make_random_quadratic(2, 3.0, 1);
  OptimizerConfig c;
  c.max_iters = 0;
  c.eval_samples = 64;
  const RunTrace trace = run(c, t, GaussianVariational::isotropic(2, 0.34), constant_schedule(0.01), 5);
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.records[0].t, 0u);
  EXPECT_TRUE(trace.records[0].w2_sq.has_value());
  EXPECT_FALSE(trace.diverged);
}

TEST(Run, ExactModeContracts) {
  std::mt19937_64 rng(6);
  const QuadraticPotential t(Matrix::Identity(2, 2), gaussian_vector(rng, 2));
  const auto& meta = t.metadata();
  const double gamma = 1.0 / (10.0 * meta.smoothness * meta.condition_number());
  for (Algorithm a : {Algorithm::SPGD, Algorithm::SPBWGD}) {
    OptimizerConfig c;
    c.algorithm = a;
    c.estimator = EstimatorKind::Exact;
    c.max_iters = 200;
    c.eval_samples = 16;
    const RunTrace trace =
        run(c, t, GaussianVariational::isotropic(2, 0.34), constant_schedule(gamma), 1);
    ASSERT_EQ(trace.records.size(), 201u);
    for (std::size_t k = 1; k < trace.records.size(); ++k)
      ASSERT_LT(*trace.records[k].w2_sq, *trace.records[k - 1].w2_sq);
    EXPECT_LT(*trace.last().w2_sq, 1e-6 * *trace.records.front().w2_sq);
  }
}

TEST(Run, Deterministic) {
  const LogisticRidgePotential t(toy_logistic_dataset(30, 4, 1), 1.0);
  OptimizerConfig c;
  c.max_iters = 50;
  c.eval_samples = 32;
  for (Algorithm a : {Algorithm::SPGD, Algorithm::SPBWGD}) {
    c.algorithm = a;
    const auto q0 = GaussianVariational::isotropic(4, 0.34);
    const RunTrace x = run(c, t, q0, constant_schedule(0.02), 9);
    const RunTrace y = run(c, t, q0, constant_schedule(0.02), 9);
    ASSERT_EQ(x.records.size(), y.records.size());
    for (std::size_t k = 0; k < x.records.size(); ++k) {
      EXPECT_EQ(x.records[k].free_energy, y.records[k].free_energy);
      EXPECT_EQ(x.records[k].gamma, y.records[k].gamma);
    }
    EXPECT_EQ(x.terminal.scale(), y.terminal.scale());
    EXPECT_FALSE(x.records.back().w2_sq.has_value());
  }
}

TEST(Run, DivergenceIsRecorded) {
  const QuadraticPotential t = make_random_quadratic(3, 100.0, 4);
  for (Algorithm a : {Algorithm::SPGD, Algorithm::SPBWGD}) {
    OptimizerConfig c;
    c.algorithm = a;
    c.max_iters = 500;
    c.eval_samples = 16;
    const RunTrace trace = run(c, t, GaussianVariational::isotropic(3, 0.34), constant_schedule(1.0), 2);
    EXPECT_TRUE(trace.diverged);
    EXPECT_TRUE(trace.last().diverged);
    EXPECT_LT(trace.records.size(), 501u);
  }
}

TEST(Run, ExactOnLogisticThrows) {
  const LogisticRidgePotential t(toy_logistic_dataset(30, 4, 1), 1.0);
  OptimizerConfig c;
  c.estimator = EstimatorKind::Exact;
  EXPECT_THROW(run(c, t, GaussianVariational::isotropic(4, 0.34), constant_schedule(0.1), 1),
               InvalidParameters);
}

TEST(OptimizerConfig, Validate) {
  OptimizerConfig c;
  EXPECT_NO_THROW(validate(c));
  c.minibatch = 0;
  EXPECT_THROW(validate(c), InvalidParameters);
  c = {};
  c.eval_samples = 1;
  EXPECT_THROW(validate(c), InvalidParameters);
  c = {};
  c.divergence_threshold = 0.0;
  EXPECT_THROW(validate(c), InvalidParameters);
}

TEST(Algorithm, Parse) {
  EXPECT_EQ(parse_algorithm("spgd"), Algorithm::SPGD);
  EXPECT_EQ(parse_algorithm("spbwgd"), Algorithm::SPBWGD);
  EXPECT_THROW(parse_algorithm("adam"), InvalidParameters);
  EXPECT_EQ(geometry_of(Algorithm::SPGD), Geometry::ParamScale);
}
