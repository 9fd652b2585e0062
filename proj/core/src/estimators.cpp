#include "bwvi/estimators.hpp"

#include <string>

#include "bwvi/errors.hpp"

namespace bwvi {
namespace {

void check_inputs(const Potential& target, const GaussianVariational& q,
                  const NoiseBatch& noise, const char* where) {
  if (target.dim() != q.dim())
    throw DimensionMismatch(where, static_cast<long>(target.dim()),
                            static_cast<long>(q.dim()));
  if (noise.dim() != q.dim())
    throw DimensionMismatch(where, static_cast<long>(q.dim()),
                            static_cast<long>(noise.dim()));
  if (noise.size() < 1)
    throw InvalidParameters(std::string(where) + ": empty noise batch");
}

Matrix sample_points(const GaussianVariational& q, const NoiseBatch& noise) {
  return (q.scale().triangularView<Eigen::Lower>() * noise.draws()).colwise() +
         q.mean();
}

// Columns are grad U(Z_k).
Matrix gradients_at(const Potential& target, const Matrix& points) {
  Matrix grads(points.rows(), points.cols());
  for (Eigen::Index k = 0; k < points.cols(); ++k)
    grads.col(k) = target.gradient(points.col(k));
  return grads;
}

Matrix mean_hessian(const Potential& target, const Matrix& points) {
  Matrix total = Matrix::Zero(points.rows(), points.rows());
  for (Eigen::Index k = 0; k < points.cols(); ++k)
    total += target.hessian(points.col(k));
  return total / static_cast<double>(points.cols());
}

const QuadraticPotential& require_quadratic(const Potential& target) {
  const auto* quadratic = dynamic_cast<const QuadraticPotential*>(&target);
  if (quadratic == nullptr)
    throw InvalidParameters(
        "exact gradients are only available for quadratic targets");
  return *quadratic;
}

}  // namespace

std::string_view to_string(Geometry g) {
  switch (g) {
    case Geometry::ParamScale:
      return "param_scale";
    case Geometry::BWCovariance:
      return "bw_covariance";
  }
  return "?";
}

std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::BonnetPrice:
      return "price";
    case EstimatorKind::BonnetReparam:
      return "reparam";
    case EstimatorKind::Exact:
      return "exact";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(std::string_view text) {
  if (text == "price" || text == "bonnet_price" || text == "BonnetPrice")
    return EstimatorKind::BonnetPrice;
  if (text == "reparam" || text == "bonnet_reparam" || text == "BonnetReparam")
    return EstimatorKind::BonnetReparam;
  if (text == "exact" || text == "Exact") return EstimatorKind::Exact;
  throw InvalidParameters("unknown estimator '" + std::string(text) + "'");
}

Vector bonnet_location(const Potential& target, const GaussianVariational& q,
                       const NoiseBatch& noise) {
  check_inputs(target, q, noise, "bonnet_location");
  return gradients_at(target, sample_points(q, noise)).rowwise().mean();
}

Matrix price_covariance(const Potential& target, const GaussianVariational& q,
                        const NoiseBatch& noise) {
  check_inputs(target, q, noise, "price_covariance");
  return symmetrize(0.5 * mean_hessian(target, sample_points(q, noise)));
}

Matrix price_scale(const Potential& target, const GaussianVariational& q,
                   const NoiseBatch& noise) {
  check_inputs(target, q, noise, "price_scale");
  const Matrix h = mean_hessian(target, sample_points(q, noise));
  return tril(h * q.scale().triangularView<Eigen::Lower>());
}

Matrix reparam_scale(const Potential& target, const GaussianVariational& q,
                     const NoiseBatch& noise) {
  check_inputs(target, q, noise, "reparam_scale");
  const Matrix grads = gradients_at(target, sample_points(q, noise));
  return tril(grads * noise.draws().transpose() /
              static_cast<double>(noise.size()));
}

Matrix reparam_covariance(const Potential& target,
                          const GaussianVariational& q,
                          const NoiseBatch& noise) {
  check_inputs(target, q, noise, "reparam_covariance");
  const Matrix grads = gradients_at(target, sample_points(q, noise));
  const Matrix outer = 0.5 * noise.draws() * grads.transpose() /
                       static_cast<double>(noise.size());
  // Sigma^{-1}(Z - m) = C^{-T} eps.
  return q.scale().transpose().triangularView<Eigen::Upper>().solve(outer);
}

AffineMap bw_gradient_field(const Eigen::Ref<const Vector>& location_grad,
                            const Matrix& covariance_grad,
                            const GaussianVariational& q) {
  const Eigen::Index d = q.dim();
  if (location_grad.size() != d)
    throw DimensionMismatch("bw_gradient_field", static_cast<long>(d),
                            static_cast<long>(location_grad.size()));
  if (covariance_grad.rows() != d || covariance_grad.cols() != d)
    throw DimensionMismatch("bw_gradient_field", static_cast<long>(d),
                            static_cast<long>(covariance_grad.rows()));
  Matrix linear = 2.0 * covariance_grad;
  Vector shift = location_grad - linear * q.mean();
  return AffineMap{std::move(linear), std::move(shift)};
}

Vector exact_location_gradient(const QuadraticPotential& target,
                               const GaussianVariational& q) {
  return target.gradient(q.mean());
}

GradientEstimate estimate_gradient(EstimatorKind kind, Geometry geometry,
                                   const Potential& target,
                                   const GaussianVariational& q,
                                   const NoiseBatch& noise) {
  GradientEstimate out;
  out.geometry = geometry;
  if (kind == EstimatorKind::Exact) {
    const auto& quadratic = require_quadratic(target);
    if (quadratic.dim() != q.dim())
      throw DimensionMismatch("estimate_gradient",
                              static_cast<long>(quadratic.dim()),
                              static_cast<long>(q.dim()));
    out.location_grad = exact_location_gradient(quadratic, q);
    out.scale_grad =
        geometry == Geometry::ParamScale
            ? tril(quadratic.precision() * q.scale())
            : Matrix(0.5 * quadratic.precision());
    out.n_samples = 0;
    return out;
  }

  check_inputs(target, q, noise, "estimate_gradient");
  // One pass over the batch for the location part; the Hessian/outer-product
  // part reuses the same points.
  const Matrix points = sample_points(q, noise);
  const Matrix grads = gradients_at(target, points);
  const auto m = static_cast<double>(noise.size());
  out.location_grad = grads.rowwise().mean();
  out.n_samples = noise.size();

  if (kind == EstimatorKind::BonnetPrice) {
    const Matrix h = mean_hessian(target, points);
    out.scale_grad = geometry == Geometry::ParamScale
                         ? tril(h * q.scale())
                         : symmetrize(0.5 * h);
  } else {
    if (geometry == Geometry::ParamScale) {
      out.scale_grad = tril(grads * noise.draws().transpose() / m);
    } else {
      const Matrix outer = 0.5 * noise.draws() * grads.transpose() / m;
      out.scale_grad =
          q.scale().transpose().triangularView<Eigen::Upper>().solve(outer);
    }
  }
  return out;
}

}  // namespace bwvi
