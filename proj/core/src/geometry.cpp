#include "bwvi/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "bwvi/errors.hpp"

namespace bwvi {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kIndefiniteTol = 1e-10;

double asymmetry(const Matrix& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

void require_square(const Matrix& a, const char* where) {
  if (a.rows() != a.cols())
    throw DimensionMismatch(where, static_cast<long>(a.rows()),
                            static_cast<long>(a.cols()));
}

void require_same_dim(const GaussianVariational& p,
                      const GaussianVariational& q, const char* where) {
  if (p.dim() != q.dim())
    throw DimensionMismatch(where, static_cast<long>(p.dim()),
                            static_cast<long>(q.dim()));
}

}  // namespace

void check_symmetric(const Matrix& a, const char* where) {
  if (a.size() == 0) return;
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(asymmetry(a) <= kSymmetryTol * scale))
    throw NotSymmetric(std::string(where) + ": matrix is not symmetric");
}


Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix tril(const Matrix& a) {
  return a.triangularView<Eigen::Lower>().toDenseMatrix();
}

Matrix cholesky_factor(const Matrix& sigma) {
  require_square(sigma, "cholesky_factor");
  const Eigen::Index d = sigma.rows();
  // Hand-rolled so that the first non-positive pivot is reported as such.
  Matrix c = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = sigma(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= c(j, k) * c(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot))
      throw NotPositiveDefinite("cholesky_factor: non-positive pivot " +
                                std::to_string(pivot) + " at index " +
                                std::to_string(j));
    const double cjj = std::sqrt(pivot);
    c(j, j) = cjj;
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double s = sigma(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= c(i, k) * c(j, k);
      c(i, j) = s / cjj;
    }
  }
  return c;
}

CovarianceMatrix::CovarianceMatrix(const Matrix& data) {
  require_square(data, "CovarianceMatrix");
  check_symmetric(data, "CovarianceMatrix");
  data_ = symmetrize(data);
  factor_ = cholesky_factor(data_);
}

GaussianVariational::GaussianVariational(Vector mean, Matrix scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  const Eigen::Index d = mean_.size();
  if (d < 1) throw InvalidParameters("GaussianVariational: empty dimension");
  if (scale_.rows() != d || scale_.cols() != d)
    throw DimensionMismatch("GaussianVariational", static_cast<long>(d),
                            static_cast<long>(scale_.rows()));
  for (Eigen::Index j = 1; j < d; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (scale_(i, j) != 0.0)
        throw InvalidParameters(
            "GaussianVariational: scale is not lower-triangular");
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(scale_(i, i) > 0.0) || !std::isfinite(scale_(i, i)))
      throw InvalidParameters(
          "GaussianVariational: scale diagonal must be positive");
  if (!mean_.allFinite() || !scale_.allFinite())
    throw InvalidParameters("GaussianVariational: non-finite parameters");
}

GaussianVariational GaussianVariational::from_covariance(
    Vector mean, const CovarianceMatrix& sigma) {
  if (mean.size() != sigma.dim())
    throw DimensionMismatch("GaussianVariational::from_covariance",
                            static_cast<long>(sigma.dim()),
                            static_cast<long>(mean.size()));
  return GaussianVariational(std::move(mean), sigma.factor());
}

GaussianVariational GaussianVariational::from_covariance(Vector mean,
                                                         const Matrix& sigma) {
  return from_covariance(std::move(mean), CovarianceMatrix(sigma));
}

GaussianVariational GaussianVariational::isotropic(Eigen::Index dim,
                                                   double variance) {
  if (!(variance > 0.0))
    throw InvalidParameters("GaussianVariational::isotropic: variance <= 0");
  return GaussianVariational(Vector::Zero(dim),
                             std::sqrt(variance) * Matrix::Identity(dim, dim));
}

Matrix GaussianVariational::covariance() const {
  return symmetrize(scale_ * scale_.transpose());
}

Matrix matrix_sqrt_psd(const Matrix& a) {
  require_square(a, "matrix_sqrt_psd");
  check_symmetric(a, "matrix_sqrt_psd");
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a));
  if (eig.info() != Eigen::Success)
    throw IndefiniteMatrix("matrix_sqrt_psd: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();
  const double norm = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -kIndefiniteTol * norm)
    throw IndefiniteMatrix("matrix_sqrt_psd: eigenvalue " +
                           std::to_string(lambda.minCoeff()) +
                           " below tolerance");
  const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * root.asDiagonal() * v.transpose());
}

AffineMap optimal_transport_map(const GaussianVariational& p,
                                const GaussianVariational& q) {
  require_same_dim(p, q, "optimal_transport_map");
  // With Sigma_p = C C^T, S = C^{-T} (C^T Sigma_q C)^{1/2} C^{-1} is the
  // unique symmetric PD solution of S Sigma_p S = Sigma_q.
  const Matrix& c = p.scale();
  const Matrix inner = symmetrize(c.transpose() * q.covariance() * c);
  const Matrix root = matrix_sqrt_psd(inner);
  const auto lower = c.triangularView<Eigen::Lower>();
  // C^{-1}: solve C X = I; then S = C^{-T} root C^{-1}.
  const Matrix c_inv = lower.solve(Matrix::Identity(p.dim(), p.dim()));
  Matrix s = symmetrize(c_inv.transpose() * root * c_inv);
  Vector shift = q.mean() - s * p.mean();
  return AffineMap{std::move(s), std::move(shift)};
}

double w2_distance_sq(const GaussianVariational& p,
                      const GaussianVariational& q) {
  require_same_dim(p, q, "w2_distance_sq");
  const Matrix& c = p.scale();
  const Matrix inner = symmetrize(c.transpose() * q.covariance() * c);
  const Matrix root = matrix_sqrt_psd(inner);
  // (I - S) C = C - C^{-T} root, with C^{-T} root from a triangular solve.
  const Matrix ct_inv_root =
      c.transpose().triangularView<Eigen::Upper>().solve(root);
  const double cov_term = (c - ct_inv_root).squaredNorm();
  return (p.mean() - q.mean()).squaredNorm() + cov_term;
}

double entropy(const GaussianVariational& q) {
  const double d = static_cast<double>(q.dim());
  const double log_det_half = q.scale().diagonal().array().log().sum();
  return -0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e) -
         log_det_half;
}

Vector sample(const GaussianVariational& q,
              const Eigen::Ref<const Vector>& noise) {
  if (noise.size() != q.dim())
    throw DimensionMismatch("sample", static_cast<long>(q.dim()),
                            static_cast<long>(noise.size()));
  return q.scale().triangularView<Eigen::Lower>() * noise + q.mean();
}

double log_density(const GaussianVariational& q,
                   const Eigen::Ref<const Vector>& x) {
  if (x.size() != q.dim())
    throw DimensionMismatch("log_density", static_cast<long>(q.dim()),
                            static_cast<long>(x.size()));
  const Vector z =
      q.scale().triangularView<Eigen::Lower>().solve(x - q.mean());
  const double d = static_cast<double>(q.dim());
  return -0.5 * z.squaredNorm() - 0.5 * d * std::log(2.0 * std::numbers::pi) -
         q.scale().diagonal().array().log().sum();
}

}  // namespace bwvi
