#include "bwvi/diagnostics.hpp"

#include <cmath>

#include "bwvi/errors.hpp"

namespace bwvi {
namespace {

void require_same_dim(Eigen::Index expected, Eigen::Index actual,
                      const char* where) {
  if (expected != actual)
    throw DimensionMismatch(where, static_cast<long>(expected),
                            static_cast<long>(actual));
}

}  // namespace

TheoryConstants theory_constants(const PotentialMetadata& meta) {
  const double kappa = meta.condition_number();
  return TheoryConstants{2.5 * meta.smoothness * kappa,
                         5.0 * static_cast<double>(meta.dim) * meta.smoothness};
}

MatrixMoments::MatrixMoments(Eigen::Index rows, Eigen::Index cols)
    : mean_(Matrix::Zero(rows, cols)), m2_(Matrix::Zero(rows, cols)) {}

void MatrixMoments::add(const Matrix& sample) {
  ++count_;
  // Welford update, entrywise.
  const Matrix delta = sample - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.array() += delta.array() * (sample - mean_).array();
}

Matrix MatrixMoments::std_error() const {
  if (count_ < 2) return Matrix::Constant(mean_.rows(), mean_.cols(), INFINITY);
  const double n = static_cast<double>(count_);
  return (m2_.array() / (n - 1.0) / n).sqrt().matrix();
}

FreeEnergyEstimate free_energy_mc(const GaussianVariational& q,
                                  const Potential& target,
                                  Eigen::Index n_samples,
                                  const NoiseLineage& lineage) {
  require_same_dim(target.dim(), q.dim(), "free_energy_mc");
  if (n_samples < 2)
    throw InvalidParameters("free_energy_mc needs at least 2 samples");
  const NoiseBatch noise = NoiseBatch::draw(lineage, q.dim(), n_samples);
  const Matrix points =
      (q.scale().triangularView<Eigen::Lower>() * noise.draws()).colwise() +
      q.mean();
  double mean = 0.0;
  double m2 = 0.0;
  for (Eigen::Index k = 0; k < n_samples; ++k) {
    const double u = target.value(points.col(k));
    const double delta = u - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (u - mean);
  }
  const double n = static_cast<double>(n_samples);
  return FreeEnergyEstimate{mean + entropy(q), std::sqrt(m2 / (n - 1.0) / n),
                            n_samples};
}

FreeEnergyEstimate free_energy_mc(const GaussianVariational& q,
                                  const Potential& target,
                                  Eigen::Index n_samples, std::uint64_t seed) {
  return free_energy_mc(q, target, n_samples,
                        NoiseLineage{seed, streams::kEvaluation, 0});
}

double free_energy_exact_quadratic(const GaussianVariational& q,
                                   const QuadraticPotential& target) {
  require_same_dim(target.dim(), q.dim(), "free_energy_exact_quadratic");
  const Matrix& a = target.precision();
  const Vector r = q.mean() - target.center();
  const double trace = (a * q.covariance()).trace();
  return 0.5 * r.dot(a * r) + 0.5 * trace + entropy(q);
}

Matrix coupled_difference_moment(const GaussianVariational& q,
                                 const GaussianVariational& q_star) {
  require_same_dim(q_star.dim(), q.dim(), "coupled_difference_moment");
  const AffineMap map = optimal_transport_map(q, q_star);
  const Eigen::Index d = q.dim();
  // X - T(X) has covariance (I - S) Sigma (I - S)^T; written with the scale
  // factor so the result is a Gram matrix.
  const Matrix residual =
      (Matrix::Identity(d, d) - map.linear) * q.scale();
  const Vector dm = q.mean() - q_star.mean();
  return symmetrize(residual * residual.transpose() + dm * dm.transpose());
}

double bregman_energy_quadratic(const GaussianVariational& q,
                                const GaussianVariational& q_star,
                                const QuadraticPotential& target) {
  require_same_dim(target.dim(), q.dim(), "bregman_energy_quadratic");
  const Matrix v = coupled_difference_moment(q, q_star);
  return std::max(0.0, 0.5 * (target.precision() * v).trace());
}

double coupled_gradient_inner_product_quadratic(
    const GaussianVariational& q, const GaussianVariational& q_star,
    const QuadraticPotential& target) {
  require_same_dim(target.dim(), q.dim(),
                   "coupled_gradient_inner_product_quadratic");
  // Exact BW gradient of the energy at q is x -> A(m - b) + A(x - m) = A(x - b).
  const Matrix v = coupled_difference_moment(q, q_star);
  return (target.precision() * v).trace();
}

MonteCarloMean estimator_second_moment(EstimatorKind kind, Geometry geometry,
                                       const GaussianVariational& q,
                                       const GaussianVariational& q_star,
                                       const QuadraticPotential& target,
                                       Eigen::Index n, std::uint64_t seed) {
  require_same_dim(target.dim(), q.dim(), "estimator_second_moment");
  require_same_dim(q_star.dim(), q.dim(), "estimator_second_moment");
  if (n < 2) throw InvalidParameters("estimator_second_moment needs n >= 2");
  const Eigen::Index d = q.dim();
  const Matrix& a = target.precision();
  const Vector& b = target.center();

  const NoiseBatch eps =
      NoiseBatch::draw({seed, streams::kGradient, 0}, d, n);
  const NoiseBatch xi = NoiseBatch::draw({seed, streams::kCoupling, 0}, d, n);

  // Exact gradient at the optimum.
  const Vector location_star = target.gradient(q_star.mean());
  const Matrix scale_star = tril(a * q_star.scale());
  AffineMap map;
  if (geometry == Geometry::BWCovariance)
    map = optimal_transport_map(q, q_star);

  double mean = 0.0;
  double m2 = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const GradientEstimate g = estimate_gradient(
        kind, geometry, target, q, NoiseBatch::from_draws(eps.draw_at(k)));
    double value = 0.0;
    if (geometry == Geometry::BWCovariance) {
      const Vector x = sample(q, xi.draw_at(k));
      const Vector x_star = map(x);
      const AffineMap field = bw_gradient_field(g.location_grad, g.scale_grad, q);
      // grad_BW E(q*)(x*) = E_{q*} grad U + A (x* - m*) = A (x* - b).
      value = (field(x) - a * (x_star - b)).squaredNorm();
    } else {
      value = (g.location_grad - location_star).squaredNorm() +
              (g.scale_grad - scale_star).squaredNorm();
    }
    const double delta = value - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (value - mean);
  }
  const double count = static_cast<double>(n);
  return MonteCarloMean{mean, std::sqrt(m2 / (count - 1.0) / count), n};
}

}  // namespace bwvi
