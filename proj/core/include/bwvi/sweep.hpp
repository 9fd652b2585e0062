#pragma once

#include <cstdint>
#include <vector>

#include "bwvi/optimizers.hpp"

namespace bwvi {

struct SweepSpec {
  std::vector<double> gammas;
  std::vector<Algorithm> algorithms{Algorithm::SPGD, Algorithm::SPBWGD};
  std::vector<EstimatorKind> estimators{EstimatorKind::BonnetPrice,
                                        EstimatorKind::BonnetReparam};
  std::uint64_t base_seed = 0;
  std::uint64_t repetitions = 1;
  std::uint64_t iterations = 4000;
  Eigen::Index minibatch = 8;
  /// Per-iteration estimate; only used for divergence detection.
  Eigen::Index trace_eval_samples = 2;
  /// Samples behind the reported final free energy.
  Eigen::Index final_eval_samples = 4096;
  double divergence_threshold = 1e12;
  unsigned workers = 1;
};

struct SweepCell {
  double gamma = 0.0;
  Algorithm algorithm = Algorithm::SPGD;
  EstimatorKind estimator = EstimatorKind::BonnetPrice;
  std::uint64_t seed = 0;
  double final_free_energy = 0.0;  ///< +inf when diverged
  bool diverged = false;
};

/// n log-spaced values from lo to hi inclusive. Throws InvalidParameters
/// unless 0 < lo <= hi and n >= 1 (n == 1 requires lo == hi).
std::vector<double> log_spaced(double lo, double hi, int n);

/// Runs every (gamma, algorithm, estimator, repetition) cell with a constant
/// step. Repetition r uses seed base_seed + r in every cell, so estimators
/// and algorithms are compared on common random numbers. Cells run on up to
/// `workers` threads; the result order is gamma-major, then algorithm,
/// estimator and seed, independent of scheduling.
std::vector<SweepCell> run_sweep(const SweepSpec& spec, const Potential& target,
                                 const GaussianVariational& q0);

}  // namespace bwvi
