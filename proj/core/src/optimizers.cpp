#include "bwvi/optimizers.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "bwvi/diagnostics.hpp"
#include "bwvi/errors.hpp"

namespace bwvi {
namespace {

void require_step(double gamma, const char* where) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw InvalidParameters(std::string(where) + ": step size must be > 0");
}

void require_gradient_dims(const GaussianVariational& q,
                           const GradientEstimate& grad, const char* where) {
  const Eigen::Index d = q.dim();
  if (grad.location_grad.size() != d)
    throw DimensionMismatch(where, static_cast<long>(d),
                            static_cast<long>(grad.location_grad.size()));
  if (grad.scale_grad.rows() != d || grad.scale_grad.cols() != d)
    throw DimensionMismatch(where, static_cast<long>(d),
                            static_cast<long>(grad.scale_grad.rows()));
}

std::optional<GaussianVariational> exact_optimum_of(const Potential& target) {
  if (const auto* quadratic = dynamic_cast<const QuadraticPotential*>(&target))
    return quadratic_optimum(*quadratic);
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  return a == Algorithm::SPGD ? "spgd" : "spbwgd";
}

Algorithm parse_algorithm(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(c));
  if (lower == "spgd") return Algorithm::SPGD;
  if (lower == "spbwgd") return Algorithm::SPBWGD;
  throw InvalidParameters("unknown algorithm '" + std::string(text) + "'");
}

Matrix entropy_prox(const Matrix& scale, double gamma) {
  require_step(gamma, "entropy_prox");
  if (scale.rows() != scale.cols())
    throw InvalidParameters("entropy_prox: scale must be square");
  Matrix out = scale;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double c = scale(i, i);
    // Positive root of c'^2 - c c' - gamma = 0. For c < 0 the equivalent
    // form 2 gamma / (sqrt(c^2 + 4 gamma) - c) avoids cancellation.
    const double root = std::sqrt(c * c + 4.0 * gamma);
    out(i, i) = c >= 0.0 ? 0.5 * (c + root) : 2.0 * gamma / (root - c);
  }
  return out;
}

CovarianceMatrix jko_entropy(const Matrix& sigma, double gamma) {
  require_step(gamma, "jko_entropy");
  if (sigma.rows() != sigma.cols())
    throw InvalidParameters("jko_entropy: covariance must be square");
  check_symmetric(sigma, "jko_entropy");
  const Eigen::Index d = sigma.rows();
  const Matrix s = symmetrize(sigma);
  const Matrix identity = Matrix::Identity(d, d);
  // Sigma and Sigma + 4 gamma I commute, so their product is symmetric PSD.
  const Matrix product = symmetrize(s * (s + 4.0 * gamma * identity));
  const Matrix root = matrix_sqrt_psd(product);
  return CovarianceMatrix(0.5 * (s + 2.0 * gamma * identity + root));
}

GaussianVariational spgd_update(const GaussianVariational& q,
                                const GradientEstimate& grad, double gamma) {
  require_step(gamma, "spgd_update");
  require_gradient_dims(q, grad, "spgd_update");
  Vector mean = q.mean() - gamma * grad.location_grad;
  const Matrix half = q.scale() - gamma * tril(grad.scale_grad);
  return GaussianVariational(std::move(mean), entropy_prox(half, gamma));
}

GaussianVariational spbwgd_update(const GaussianVariational& q,
                                  const GradientEstimate& grad, double gamma) {
  require_step(gamma, "spbwgd_update");
  require_gradient_dims(q, grad, "spbwgd_update");
  const Eigen::Index d = q.dim();
  Vector mean = q.mean() - gamma * grad.location_grad;
  const Matrix m = Matrix::Identity(d, d) - 2.0 * gamma * grad.scale_grad;
  // M Sigma M^T = (M C)(M C)^T is PSD even when M is not symmetric.
  const Matrix mc = m * q.scale();
  const Matrix half = symmetrize(mc * mc.transpose());
  return GaussianVariational::from_covariance(std::move(mean),
                                              jko_entropy(half, gamma));
}

GaussianVariational spgd_step(const GaussianVariational& q,
                              const Potential& target, const NoiseBatch& noise,
                              double gamma, EstimatorKind kind) {
  return spgd_update(
      q, estimate_gradient(kind, Geometry::ParamScale, target, q, noise),
      gamma);
}

GaussianVariational spbwgd_step(const GaussianVariational& q,
                                const Potential& target,
                                const NoiseBatch& noise, double gamma,
                                EstimatorKind kind) {
  return spbwgd_update(
      q, estimate_gradient(kind, Geometry::BWCovariance, target, q, noise),
      gamma);
}

void validate(const OptimizerConfig& config) {
  if (config.minibatch < 1)
    throw InvalidParameters("minibatch must be >= 1");
  if (config.eval_samples < 2)
    throw InvalidParameters("eval_samples must be >= 2");
  if (!(config.divergence_threshold > 0.0))
    throw InvalidParameters("divergence_threshold must be positive");
}

RunTrace run(const OptimizerConfig& config, const Potential& target,
             const GaussianVariational& q0, const StepSchedule& schedule,
             std::uint64_t seed, std::optional<GaussianVariational> optimum) {
  validate(config);
  if (target.dim() != q0.dim())
    throw DimensionMismatch("run", static_cast<long>(target.dim()),
                            static_cast<long>(q0.dim()));
  if (config.estimator == EstimatorKind::Exact &&
      dynamic_cast<const QuadraticPotential*>(&target) == nullptr)
    throw InvalidParameters(
        "exact gradients are only available for quadratic targets");
  if (!optimum) optimum = exact_optimum_of(target);

  RunTrace trace{{}, q0, seed, false};
  trace.records.reserve(static_cast<std::size_t>(config.max_iters) + 1);

  const auto record_state = [&](std::uint64_t t, const GaussianVariational& q) {
    TraceRecord rec;
    rec.t = t;
    rec.gamma = schedule.step_at(t);
    const FreeEnergyEstimate f = free_energy_mc(
        q, target, config.eval_samples, {seed, streams::kEvaluation, t});
    rec.free_energy = f.value;
    rec.free_energy_se = f.std_error;
    if (optimum) rec.w2_sq = w2_distance_sq(q, *optimum);
    rec.diverged = !std::isfinite(f.value) ||
                   f.value > config.divergence_threshold;
    return rec;
  };

  trace.records.push_back(record_state(0, q0));
  if (trace.records.back().diverged) {
    trace.diverged = true;
    return trace;
  }

  const Geometry geometry = geometry_of(config.algorithm);
  GaussianVariational q = q0;
  for (std::uint64_t t = 0; t < config.max_iters; ++t) {
    const double gamma = schedule.step_at(t);
    try {
      const NoiseBatch noise = NoiseBatch::draw({seed, streams::kGradient, t},
                                                q.dim(), config.minibatch);
      const GradientEstimate grad =
          estimate_gradient(config.estimator, geometry, target, q, noise);
      if (!grad.location_grad.allFinite() || !grad.scale_grad.allFinite())
        throw InvalidParameters("non-finite gradient estimate");
      q = config.algorithm == Algorithm::SPGD ? spgd_update(q, grad, gamma)
                                              : spbwgd_update(q, grad, gamma);
      trace.records.push_back(record_state(t + 1, q));
    } catch (const Error&) {
      // Numerical breakdown of the step counts as divergence.
      TraceRecord rec;
      rec.t = t + 1;
      rec.gamma = schedule.step_at(t + 1);
      rec.free_energy = INFINITY;
      rec.free_energy_se = INFINITY;
      rec.diverged = true;
      trace.records.push_back(rec);
    }
    if (trace.records.back().diverged) {
      trace.diverged = true;
      break;
    }
    trace.terminal = q;
  }
  return trace;
}

}  // namespace bwvi
