#pragma once

// Free-energy estimation, closed-form oracles for quadratic targets,
// Bregman energy divergences and estimator second-moment probes.

#include <cstdint>

#include "bwvi/estimators.hpp"
#include "bwvi/geometry.hpp"
#include "bwvi/noise.hpp"
#include "bwvi/targets.hpp"

namespace bwvi {

/// F(q) = E_q[U] + H(q). Only the energy is sampled; std_error covers it
/// alone since the entropy is exact.
struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Eigen::Index n_samples = 0;
};

/// Scalar Monte Carlo mean with its standard error.
struct MonteCarloMean {
  double value = 0.0;
  double std_error = 0.0;
  Eigen::Index n_samples = 0;
};

/// Constants of the expected-smoothness noise model induced by the
/// Bonnet-Price estimator: L_eps = (5/2) L kappa and sigma^2 = 5 d L.
struct TheoryConstants {
  double expected_smoothness = 0.0;
  double additive_noise = 0.0;
};

TheoryConstants theory_constants(const PotentialMetadata& meta);

/// Entrywise running mean and standard error of matrix-valued samples.
class MatrixMoments {
 public:
  MatrixMoments(Eigen::Index rows, Eigen::Index cols);

  void add(const Matrix& sample);
  Eigen::Index count() const { return count_; }
  Matrix mean() const { return mean_; }
  /// Sample standard deviation / sqrt(count).
  Matrix std_error() const;

 private:
  Eigen::Index count_ = 0;
  Matrix mean_;
  Matrix m2_;
};

/// Throws InvalidParameters if n_samples < 2.
FreeEnergyEstimate free_energy_mc(const GaussianVariational& q,
                                  const Potential& target,
                                  Eigen::Index n_samples,
                                  const NoiseLineage& lineage);
FreeEnergyEstimate free_energy_mc(const GaussianVariational& q,
                                  const Potential& target,
                                  Eigen::Index n_samples, std::uint64_t seed);

/// 1/2 (m - b)^T A (m - b) + 1/2 tr(A C C^T) + H(q).
double free_energy_exact_quadratic(const GaussianVariational& q,
                                   const QuadraticPotential& target);

/// E[(X - X*)(X - X*)^T] under the optimal coupling of q and q_star:
/// (I - S) Sigma_q (I - S) + (m - m*)(m - m*)^T.
Matrix coupled_difference_moment(const GaussianVariational& q,
                                 const GaussianVariational& q_star);

/// Bregman divergence of the energy, E[D_U(X, X*)] under the optimal
/// coupling; for a quadratic this is 1/2 tr(A V) with V the coupled moment.
double bregman_energy_quadratic(const GaussianVariational& q,
                                const GaussianVariational& q_star,
                                const QuadraticPotential& target);

/// E<grad_BW E(q)(X) - grad_BW E(q*)(X*), X - X*> under the optimal coupling
/// with exact gradients; equals tr(A V) for a quadratic.
double coupled_gradient_inner_product_quadratic(
    const GaussianVariational& q, const GaussianVariational& q_star,
    const QuadraticPotential& target);

/// Monte Carlo estimate of the gradient second moment around the optimum.
///
/// BWCovariance: E||grad_hat_BW E(q; eps)(X) - grad_BW E(q*)(X*)||^2 with
/// (X, X*) optimally coupled and eps independent.
/// ParamScale: E||grad_hat_lambda E(q; eps) - grad_lambda E(q*)||^2 over the
/// (m, tril C) coordinates.
/// Each of the n draws uses a single-sample estimator.
MonteCarloMean estimator_second_moment(EstimatorKind kind, Geometry geometry,
                                       const GaussianVariational& q,
                                       const GaussianVariational& q_star,
                                       const QuadraticPotential& target,
                                       Eigen::Index n, std::uint64_t seed);

inline double w2_to_optimum(const GaussianVariational& q,
                            const GaussianVariational& q_star) {
  return w2_distance_sq(q, q_star);
}

}  // namespace bwvi
