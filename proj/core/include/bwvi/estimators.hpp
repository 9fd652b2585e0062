#pragma once

// Stochastic estimators of the energy gradient E(q) = E_q[U].
//
// Every estimator averages over the draws of a NoiseBatch, with
// Z_k = C eps_k + m. Scale-space (SPGD) estimators use the chain-rule
// orientation grad_C E = (E_q grad^2 U) C, which is what finite differences
// of lambda -> E(q_lambda) produce.

#include <string_view>

#include "bwvi/geometry.hpp"
#include "bwvi/noise.hpp"
#include "bwvi/targets.hpp"

namespace bwvi {

/// Which space the second component of a GradientEstimate lives in.
enum class Geometry {
  ParamScale,    ///< gradient w.r.t. the scale factor C (lower-triangular)
  BWCovariance,  ///< gradient w.r.t. the covariance Sigma
};

enum class EstimatorKind {
  BonnetPrice,    ///< grad U for the location, Hessian for scale/covariance
  BonnetReparam,  ///< first-order only
  Exact,          ///< closed-form expectations; quadratic targets only
};

std::string_view to_string(Geometry g);
std::string_view to_string(EstimatorKind k);
/// Accepts "price", "reparam", "exact" (and the enum spellings). Throws
/// InvalidParameters.
EstimatorKind parse_estimator_kind(std::string_view text);

struct GradientEstimate {
  Vector location_grad;
  Matrix scale_grad;
  Geometry geometry = Geometry::ParamScale;
  Eigen::Index n_samples = 0;  ///< 0 marks an exact (non-sampled) gradient
};

/// (1/M) sum_k grad U(Z_k).
Vector bonnet_location(const Potential& target, const GaussianVariational& q,
                       const NoiseBatch& noise);

/// (1/M) sum_k 1/2 grad^2 U(Z_k), symmetrized.
Matrix price_covariance(const Potential& target, const GaussianVariational& q,
                        const NoiseBatch& noise);

/// tril((1/M) sum_k grad^2 U(Z_k) C).
Matrix price_scale(const Potential& target, const GaussianVariational& q,
                   const NoiseBatch& noise);

/// tril((1/M) sum_k grad U(Z_k) eps_k^T).
Matrix reparam_scale(const Potential& target, const GaussianVariational& q,
                     const NoiseBatch& noise);

/// (1/M) sum_k 1/2 Sigma^{-1} (Z_k - m) grad U(Z_k)^T, computed as
/// 1/2 C^{-T} eps_k grad U(Z_k)^T. By Stein's identity its mean is
/// 1/2 E_q grad^2 U = grad_Sigma E. Not symmetrized.
Matrix reparam_covariance(const Potential& target,
                          const GaussianVariational& q,
                          const NoiseBatch& noise);

/// x -> location_grad + 2 covariance_grad (x - m).
AffineMap bw_gradient_field(const Eigen::Ref<const Vector>& location_grad,
                            const Matrix& covariance_grad,
                            const GaussianVariational& q);

/// Closed-form E_q[grad U] and E_q[grad^2 U] for a quadratic target.
Vector exact_location_gradient(const QuadraticPotential& target,
                               const GaussianVariational& q);

/// Pairs the location estimator with the scale or covariance estimator
/// selected by `kind`. Exact mode needs a QuadraticPotential and ignores
/// `noise`; otherwise InvalidParameters is thrown.
GradientEstimate estimate_gradient(EstimatorKind kind, Geometry geometry,
                                   const Potential& target,
                                   const GaussianVariational& q,
                                   const NoiseBatch& noise);

}  // namespace bwvi
