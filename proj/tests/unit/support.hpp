#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "bwvi/geometry.hpp"
#include "bwvi/targets.hpp"

namespace bwvi::test {

inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index r,
                              Eigen::Index c) {
  std::normal_distribution<double> n;
  Matrix out(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) out(i, j) = n(rng);
  return out;
}

inline Vector gaussian_vector(std::mt19937_64& rng, Eigen::Index d) {
  return gaussian_matrix(rng, d, 1).col(0);
}

/// B B^T + ridge I with B standard normal.
inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index d,
                         double ridge = 0.1) {
  const Matrix b = gaussian_matrix(rng, d, d);
  return b * b.transpose() + ridge * Matrix::Identity(d, d);
}

inline GaussianVariational random_gaussian(std::mt19937_64& rng,
                                           Eigen::Index d) {
  return GaussianVariational::from_covariance(gaussian_vector(rng, d),
                                              random_spd(rng, d, 0.2));
}

// Oracles below deliberately avoid the library's own code paths.

/// Symmetric square root from Eigen's eigensolver.
inline Matrix oracle_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Trace form ||dm||^2 + tr(Sp + Sq - 2 (Sp^1/2 Sq Sp^1/2)^1/2).
inline double oracle_w2_sq(const Vector& mp, const Matrix& sp, const Vector& mq,
                           const Matrix& sq) {
  const Matrix rp = oracle_sqrt(sp);
  const Matrix cross = oracle_sqrt(rp * sq * rp);
  return (mp - mq).squaredNorm() + (sp + sq - 2.0 * cross).trace();
}

/// Central differences of a scalar function of a vector.
template <typename F>
Vector fd_gradient(F f, const Vector& x) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace bwvi::test
