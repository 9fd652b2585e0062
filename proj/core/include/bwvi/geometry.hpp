#pragma once

// Gaussian and Bures-Wasserstein primitives: factorizations, PSD square
// roots, W2 distances, optimal transport maps, entropy and sampling.

#include <Eigen/Dense>

namespace bwvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric positive-definite matrix. Construction symmetrizes the input
/// as (A + A^T)/2 and verifies positive definiteness by factorizing it; the
/// factor is kept.
class CovarianceMatrix {
 public:
  /// Throws NotSymmetric when max|A_ij - A_ji| > 1e-10 * max|A_ij|, and
  /// NotPositiveDefinite when the factorization fails.
  explicit CovarianceMatrix(const Matrix& data);

  Eigen::Index dim() const { return data_.rows(); }
  const Matrix& data() const { return data_; }
  /// Lower-triangular Cholesky factor.
  const Matrix& factor() const { return factor_; }

 private:
  Matrix data_;
  Matrix factor_;
};

/// N(m, C C^T) with C lower-triangular and diag(C) > 0.
class GaussianVariational {
 public:
  /// Throws DimensionMismatch, or InvalidParameters when `scale` has entries
  /// above the diagonal or a non-positive (or non-finite) diagonal.
  GaussianVariational(Vector mean, Matrix scale);

  static GaussianVariational from_covariance(Vector mean,
                                             const CovarianceMatrix& sigma);
  static GaussianVariational from_covariance(Vector mean, const Matrix& sigma);
  static GaussianVariational isotropic(Eigen::Index dim, double variance);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& scale() const { return scale_; }
  /// Sigma = C C^T, symmetrized.
  Matrix covariance() const;

 private:
  Vector mean_;
  Matrix scale_;
};

/// Affine map x -> linear * x + shift.
struct AffineMap {
  Matrix linear;
  Vector shift;

  Vector operator()(const Eigen::Ref<const Vector>& x) const {
    return linear * x + shift;
  }
  /// Applies the map to every column.
  Matrix apply_columns(const Matrix& xs) const {
    return (linear * xs).colwise() + shift;
  }
};

/// Returns (A + A^T) / 2.
Matrix symmetrize(const Matrix& a);
/// Throws NotSymmetric when max|a - a^T| exceeds 1e-10 max|a|.
void check_symmetric(const Matrix& a, const char* where);

/// Keeps the lower triangle (diagonal included), zeroes the rest.
Matrix tril(const Matrix& a);

/// Lower-triangular C with C C^T = sigma. Throws NotPositiveDefinite if a
/// pivot is not strictly positive.
Matrix cholesky_factor(const Matrix& sigma);
inline Matrix cholesky_factor(const CovarianceMatrix& sigma) {
  return sigma.factor();
}

/// Unique symmetric PSD square root via symmetric eigendecomposition with
/// eigenvalues clamped at zero. Eigenvalues below -1e-10 * ||a|| raise
/// IndefiniteMatrix.
Matrix matrix_sqrt_psd(const Matrix& a);

/// Optimal transport map from p to q: x -> S (x - m_p) + m_q with S
/// symmetric positive definite and S Sigma_p S = Sigma_q.
AffineMap optimal_transport_map(const GaussianVariational& p,
                                const GaussianVariational& q);

/// Squared 2-Wasserstein distance between two Gaussians.
///
/// Evaluated as the transport cost of the optimal map,
/// ||m_p - m_q||^2 + ||(I - S) C_p||_F^2, which equals the usual trace
/// formula but is a sum of squares and does not lose precision to
/// cancellation when p and q are close.
double w2_distance_sq(const GaussianVariational& p,
                      const GaussianVariational& q);

/// Negative differential entropy E_q[log q].
double entropy(const GaussianVariational& q);

/// C eps + m.
Vector sample(const GaussianVariational& q,
              const Eigen::Ref<const Vector>& noise);

/// Log-density of q at x.
double log_density(const GaussianVariational& q,
                   const Eigen::Ref<const Vector>& x);

}  // namespace bwvi
