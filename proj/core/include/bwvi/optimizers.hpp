#pragma once

// Stochastic proximal gradient descent in parameter space (SPGD) and in
// Bures-Wasserstein space (SPBWGD), plus the run driver.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "bwvi/estimators.hpp"
#include "bwvi/geometry.hpp"
#include "bwvi/noise.hpp"
#include "bwvi/schedules.hpp"
#include "bwvi/targets.hpp"

namespace bwvi {

enum class Algorithm { SPGD, SPBWGD };

std::string_view to_string(Algorithm a);
/// Accepts "spgd" / "spbwgd" in any case. Throws InvalidParameters.
Algorithm parse_algorithm(std::string_view text);

/// Geometry in which an algorithm consumes its scale/covariance gradient.
inline Geometry geometry_of(Algorithm a) {
  return a == Algorithm::SPGD ? Geometry::ParamScale : Geometry::BWCovariance;
}

/// Euclidean proximal operator of gamma * H on the scale factor: the
/// off-diagonal part is kept and C_ii -> (C_ii + sqrt(C_ii^2 + 4 gamma)) / 2.
/// Non-positive input diagonals are repaired. Throws InvalidParameters if
/// gamma <= 0 or the input is not square.
Matrix entropy_prox(const Matrix& scale, double gamma);

/// JKO step of the entropy on Bures-Wasserstein space:
/// (Sigma + 2 gamma I + (Sigma (Sigma + 4 gamma I))^{1/2}) / 2.
/// Throws NotSymmetric, IndefiniteMatrix or InvalidParameters.
CovarianceMatrix jko_entropy(const Matrix& sigma, double gamma);

/// m' = m - gamma g_m, C' = prox(C - gamma tril(g_C)).
GaussianVariational spgd_update(const GaussianVariational& q,
                                const GradientEstimate& grad, double gamma);

/// m' = m - gamma g_m, M = I - 2 gamma g_Sigma, Sigma' = JKO(M Sigma M^T).
/// g_Sigma need not be symmetric. Throws NotPositiveDefinite when the new
/// covariance cannot be factorized.
GaussianVariational spbwgd_update(const GaussianVariational& q,
                                  const GradientEstimate& grad, double gamma);

GaussianVariational spgd_step(const GaussianVariational& q,
                              const Potential& target, const NoiseBatch& noise,
                              double gamma,
                              EstimatorKind kind = EstimatorKind::BonnetPrice);

GaussianVariational spbwgd_step(const GaussianVariational& q,
                                const Potential& target,
                                const NoiseBatch& noise, double gamma,
                                EstimatorKind kind = EstimatorKind::BonnetPrice);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::SPBWGD;
  EstimatorKind estimator = EstimatorKind::BonnetPrice;
  Eigen::Index minibatch = 8;
  std::uint64_t max_iters = 1000;
  double divergence_threshold = 1e12;
  /// Samples behind the per-record free-energy estimate.
  Eigen::Index eval_samples = 4096;
};

/// Throws InvalidParameters on a non-positive minibatch, eval_samples < 2 or
/// a non-positive divergence threshold.
void validate(const OptimizerConfig& config);

struct TraceRecord {
  std::uint64_t t = 0;
  double gamma = 0.0;  ///< step size scheduled at t
  double free_energy = 0.0;
  double free_energy_se = 0.0;
  std::optional<double> w2_sq;  ///< present when an optimum is known
  bool diverged = false;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  GaussianVariational terminal;
  std::uint64_t seed = 0;
  bool diverged = false;

  const TraceRecord& last() const { return records.back(); }
};

/// Runs max_iters iterations from q0. Iteration t draws its gradient noise
/// from lineage (seed, gradient stream, t) and its evaluation noise from
/// (seed, evaluation stream, t). Records one entry for the initial state and
/// one per completed iteration; stops early (marking the trace diverged) on a
/// non-finite or too-large free energy or a numerical failure of a step.
/// When `optimum` is empty and the target is quadratic, the exact optimum is
/// used for the W2 column.
RunTrace run(const OptimizerConfig& config, const Potential& target,
             const GaussianVariational& q0, const StepSchedule& schedule,
             std::uint64_t seed,
             std::optional<GaussianVariational> optimum = std::nullopt);

}  // namespace bwvi
