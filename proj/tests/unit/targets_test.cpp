#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "bwvi/errors.hpp"
#include "bwvi/targets.hpp"
#include "support.hpp"

using namespace bwvi;
using namespace bwvi::test;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("bwvi_" + name);
  std::ofstream(path) << text;
  return path;
}

// Direct summation of the ridge-logistic potential.
double logistic_oracle(const LogisticDataset& data, double ridge,
                       const Vector& x) {
  double total = 0.5 * ridge * x.squaredNorm();
  for (Eigen::Index i = 0; i < data.design.rows(); ++i) {
    double z = 0.0;
    for (Eigen::Index j = 0; j < data.design.cols(); ++j)
      z += data.design(i, j) * x(j);
    total += std::log1p(std::exp(z)) - data.labels(i) * z;
  }
  return total;
}

std::vector<std::unique_ptr<Potential>> probe_targets() {
  std::vector<std::unique_ptr<Potential>> out;
  out.push_back(std::make_unique<QuadraticPotential>(make_random_quadratic(4, 30.0, 1)));
  out.push_back(std::make_unique<LogisticRidgePotential>(
      toy_logistic_dataset(60, 10, 20240501), 1.0));
  out.push_back(std::make_unique<LogisticRidgePotential>(
      toy_logistic_dataset(25, 3, 7), 0.3));
  return out;
}

}  // namespace

TEST(Quadratic, ValueExamples) {
  const QuadraticPotential q(Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_EQ(q.value(Vector::Zero(2)), 0.0);
  EXPECT_DOUBLE_EQ(q.value(Vector::Ones(2)), 1.0);
  EXPECT_THROW(q.value(Vector::Zero(3)), DimensionMismatch);
}

TEST(Quadratic, GradientAndHessianExamples) {
  const QuadraticPotential q(Matrix::Identity(2, 2), Vector::Zero(2));
  Vector x(2);
  x << 3, -1;
  EXPECT_TRUE(q.gradient(x).isApprox(x));
  std::mt19937_64 rng(1);
  const Matrix a = random_spd(rng, 3);
  const Vector b = gaussian_vector(rng, 3);
  const QuadraticPotential r(a, b);
  EXPECT_EQ(r.gradient(b).norm(), 0.0);
  EXPECT_TRUE(r.hessian(gaussian_vector(rng, 3)).isApprox(a));
}

TEST(Quadratic, MetadataFromEigenvalues) {
  const QuadraticPotential q(Matrix(Vector::LinSpaced(3, 0.5, 4.0).asDiagonal()),
                             Vector::Zero(3));
  EXPECT_DOUBLE_EQ(q.metadata().strong_convexity, 0.5);
  EXPECT_DOUBLE_EQ(q.metadata().smoothness, 4.0);
  EXPECT_DOUBLE_EQ(q.metadata().condition_number(), 8.0);
}

TEST(Quadratic, RandomHasRequestedCondition) {
  const QuadraticPotential q = make_random_quadratic(6, 37.0, 5);
  EXPECT_NEAR(q.metadata().smoothness, 37.0, 1e-9);
  EXPECT_NEAR(q.metadata().strong_convexity, 1.0, 1e-12);
  const QuadraticPotential again = make_random_quadratic(6, 37.0, 5);
  EXPECT_EQ(q.precision(), again.precision());
  EXPECT_EQ(q.center(), again.center());
}

TEST(Quadratic, Errors) {
  Matrix asym(2, 2);
  asym << 1, 0.3, 0, 1;
  EXPECT_THROW(QuadraticPotential(asym, Vector::Zero(2)), NotSymmetric);
  EXPECT_THROW(QuadraticPotential(-Matrix::Identity(2, 2), Vector::Zero(2)),
               NotPositiveDefinite);
  EXPECT_THROW(QuadraticPotential(Matrix::Identity(2, 2), Vector::Zero(3)),
               DimensionMismatch);
}

TEST(QuadraticOptimum, Examples) {
  const auto q0 = quadratic_optimum(QuadraticPotential(Matrix::Identity(2, 2), Vector::Zero(2)));
  EXPECT_EQ(q0.mean(), Vector::Zero(2));
  EXPECT_TRUE(q0.covariance().isApprox(Matrix::Identity(2, 2)));

  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 2, 8;
  Vector b(2);
  b << 1, 0;
  const auto q = quadratic_optimum(QuadraticPotential(a, b));
  Matrix want = Matrix::Zero(2, 2);
  want.diagonal() << 0.5, 0.125;
  EXPECT_EQ(q.mean(), b);
  EXPECT_TRUE(q.covariance().isApprox(want, 1e-15));
}

TEST(QuadraticOptimum, Stationarity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = make_random_quadratic(1 + seed % 8, 50.0, seed);
    const auto q = quadratic_optimum(t);
    ASSERT_LE((t.precision() * (q.mean() - t.center())).norm(), 1e-12);
    // E_q* grad^2 U = Sigma*^{-1}
    const Matrix inv = q.covariance().inverse();
    ASSERT_LE(rel_err(inv, t.precision()), 1e-10);
  }
}

TEST(Logistic, ValueMatchesSummationOracle) {
  const LogisticDataset data = toy_logistic_dataset(4, 3, 99);
  const LogisticRidgePotential u(data, 0.7);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector x = 2.0 * gaussian_vector(rng, 3);
    const double want = logistic_oracle(data, 0.7, x);
    ASSERT_NEAR(u.value(x), want, 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST(Logistic, StableForLargeMargins) {
  LogisticDataset data{Matrix::Ones(1, 1), Vector::Ones(1)};
  const LogisticRidgePotential u(data, 1.0);
  Vector x(1);
  x << 800.0;
  EXPECT_TRUE(std::isfinite(u.value(x)));
  x << -800.0;
  EXPECT_NEAR(u.value(x), 0.5 * 640000.0 + 800.0, 1e-6);
}

TEST(Logistic, ZeroDesignReducesToRidge) {
  LogisticDataset data{Matrix::Zero(5, 3), Vector::Zero(5)};
  const LogisticRidgePotential u(data, 1.0);
  EXPECT_TRUE(u.hessian(Vector::Ones(3)).isApprox(Matrix::Identity(3, 3)));
  EXPECT_DOUBLE_EQ(u.metadata().smoothness, 1.0);
}

TEST(Logistic, MetadataBound) {
  const LogisticDataset data = toy_logistic_dataset(60, 10, 20240501);
  const LogisticRidgePotential u(data, 2.0);
  const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(
                          data.design.transpose() * data.design)
                          .eigenvalues()
                          .maxCoeff();
  EXPECT_DOUBLE_EQ(u.metadata().strong_convexity, 2.0);
  EXPECT_NEAR(u.metadata().smoothness, 2.0 + 0.25 * lmax, 1e-10 * lmax);
}

TEST(Targets, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (const auto& target : probe_targets()) {
    const Eigen::Index d = target->dim();
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = gaussian_vector(rng, d);
      const Vector g = target->gradient(x);
      const Vector g_fd = fd_gradient([&](const Vector& y) { return target->value(y); }, x);
      ASSERT_LE((g - g_fd).norm(), 1e-6 * std::max(1.0, g.norm()));
      const Matrix h = target->hessian(x);
      Matrix h_fd(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        h_fd.row(i) = fd_gradient([&](const Vector& y) { return target->gradient(y)(i); }, x)
                          .transpose();
      ASSERT_LE((h - h_fd).norm(), 1e-5 * std::max(1.0, h.norm()));
      ASSERT_EQ((h - h.transpose()).norm(), 0.0);
    }
  }
}

TEST(Targets, HessianSpectrumWithinBounds) {
  std::mt19937_64 rng(4);
  for (const auto& target : probe_targets()) {
    const auto& meta = target->metadata();
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = 3.0 * gaussian_vector(rng, target->dim());
      const Vector ev =
          Eigen::SelfAdjointEigenSolver<Matrix>(target->hessian(x)).eigenvalues();
      ASSERT_GE(ev.minCoeff(), meta.strong_convexity - 1e-8);
      ASSERT_LE(ev.maxCoeff(), meta.smoothness + 1e-8);
    }
  }
}

TEST(Dataset, ReadsTwoRowFile) {
  const auto path = write_temp("two_rows.csv", "a,b,y\n0,1,1\n1,0,0\n");
  const LogisticDataset d = load_logistic_dataset(path);
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  Vector y(2);
  y << 1, 0;
  EXPECT_EQ(d.design, x);
  EXPECT_EQ(d.labels, y);
}

TEST(Dataset, Errors) {
  EXPECT_THROW(load_logistic_dataset(write_temp("empty.csv", "a,b,y\n")), ParseError);
  EXPECT_THROW(load_logistic_dataset(write_temp("label2.csv", "a,y\n0.5,2\n")), LabelError);
  EXPECT_THROW(load_logistic_dataset(write_temp("bad.csv", "a,y\nx1,1\n")), ParseError);
  EXPECT_THROW(load_logistic_dataset(write_temp("ragged.csv", "a,b,y\n1,1\n")), ParseError);
  EXPECT_THROW(load_logistic_dataset("/nonexistent/dir/data.csv"), IoError);
}

TEST(Dataset, RoundTrip) {
  const LogisticDataset d = toy_logistic_dataset(17, 4, 3);
  const auto path = std::filesystem::temp_directory_path() / "bwvi_roundtrip.csv";
  write_logistic_dataset(d, path);
  const LogisticDataset back = load_logistic_dataset(path);
  EXPECT_EQ(back.design, d.design);
  EXPECT_EQ(back.labels, d.labels);
}
