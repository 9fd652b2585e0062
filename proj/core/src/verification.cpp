#include "bwvi/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "bwvi/diagnostics.hpp"
#include "bwvi/errors.hpp"
#include "bwvi/estimators.hpp"
#include "bwvi/geometry.hpp"
#include "bwvi/noise.hpp"
#include "bwvi/optimizers.hpp"
#include "bwvi/schedules.hpp"
#include "bwvi/sweep.hpp"
#include "bwvi/targets.hpp"

namespace bwvi {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSuiteSeed = 0x5eed2024ULL;

// ---------------------------------------------------------------------------
// Update operators, optionally corrupted.

struct Operators {
  Mutation mutation = Mutation::None;

  Matrix prox(const Matrix& scale, double gamma) const {
    if (mutation != Mutation::ProxUnsquared) return entropy_prox(scale, gamma);
    Matrix out = scale;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, i) = 0.5 * (scale(i, i) + std::sqrt(scale(i, i) + 4.0 * gamma));
    return out;
  }

  Matrix jko(const Matrix& sigma, double gamma) const {
    if (mutation != Mutation::JkoShift)
      return jko_entropy(sigma, gamma).data();
    const Eigen::Index d = sigma.rows();
    const Matrix id = Matrix::Identity(d, d);
    const Matrix root = matrix_sqrt_psd(symmetrize(sigma * (sigma + 4.0 * gamma * id)));
    return symmetrize(0.5 * (sigma + gamma * id + root));
  }

  GradientEstimate estimate(EstimatorKind kind, Geometry geometry,
                            const Potential& target,
                            const GaussianVariational& q,
                            const NoiseBatch& noise) const {
    GradientEstimate g = estimate_gradient(kind, geometry, target, q, noise);
    if (mutation == Mutation::ScaleOrientation &&
        kind == EstimatorKind::BonnetPrice &&
        geometry == Geometry::ParamScale) {
      // Undo the chain-rule orientation: tril(H C) -> tril(C^T H).
      Matrix total = Matrix::Zero(q.dim(), q.dim());
      for (Eigen::Index k = 0; k < noise.size(); ++k)
        total += target.hessian(sample(q, noise.draw_at(k)));
      total /= static_cast<double>(noise.size());
      g.scale_grad = tril(q.scale().transpose() * total);
    }
    if (mutation == Mutation::ReparamCovarianceScale &&
        kind == EstimatorKind::BonnetReparam &&
        geometry == Geometry::BWCovariance)
      g.scale_grad *= 2.0;
    return g;
  }

  bool uses_library_updates() const {
    return mutation != Mutation::ProxUnsquared &&
           mutation != Mutation::JkoShift;
  }

  GaussianVariational spgd(const GaussianVariational& q,
                           const GradientEstimate& g, double gamma) const {
    if (uses_library_updates()) return spgd_update(q, g, gamma);
    Vector mean = q.mean() - gamma * g.location_grad;
    Matrix scale = prox(q.scale() - gamma * tril(g.scale_grad), gamma);
    if (!scale.allFinite() || (scale.diagonal().array() <= 0.0).any())
      throw NotPositiveDefinite("corrupted prox produced an invalid scale");
    return GaussianVariational(std::move(mean), std::move(scale));
  }

  GaussianVariational spbwgd(const GaussianVariational& q,
                             const GradientEstimate& g, double gamma) const {
    if (uses_library_updates()) return spbwgd_update(q, g, gamma);
    const Eigen::Index d = q.dim();
    Vector mean = q.mean() - gamma * g.location_grad;
    const Matrix mc = (Matrix::Identity(d, d) - 2.0 * gamma * g.scale_grad) *
                      q.scale();
    const Matrix sigma = jko(symmetrize(mc * mc.transpose()), gamma);
    return GaussianVariational::from_covariance(std::move(mean), sigma);
  }
};

// ---------------------------------------------------------------------------
// Helpers

struct Timer {
  Clock::time_point start = Clock::now();
  double seconds() const {
    return std::chrono::duration<double>(Clock::now() - start).count();
  }
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

bool full(const SuiteOptions& o) { return o.level == VerifyLevel::Full; }

GaussianVariational random_gaussian(std::mt19937_64& engine, Eigen::Index d,
                                    double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector mean(d);
  Matrix scale = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    mean(i) = spread * normal(engine);
    scale(i, i) = std::exp(0.5 * normal(engine));
    for (Eigen::Index j = 0; j < i; ++j) scale(i, j) = 0.5 * normal(engine);
  }
  return GaussianVariational(std::move(mean), std::move(scale));
}

// q* perturbed in mean and scale.
GaussianVariational perturb(const GaussianVariational& q,
                            std::mt19937_64& engine, double size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = q.dim();
  Vector mean = q.mean();
  Matrix scale = q.scale();
  for (Eigen::Index i = 0; i < d; ++i) {
    mean(i) += size * normal(engine);
    scale(i, i) *= std::exp(size * normal(engine));
    for (Eigen::Index j = 0; j < i; ++j)
      scale(i, j) += size * scale(i, i) * normal(engine);
  }
  return GaussianVariational(std::move(mean), std::move(scale));
}

// Entrywise |mean - target| <= 5 SE + floor; returns the worst z-score.
double worst_z(const Matrix& mean, const Matrix& se, const Matrix& target,
               bool& ok) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < mean.rows(); ++i)
    for (Eigen::Index j = 0; j < mean.cols(); ++j) {
      const double diff = std::abs(mean(i, j) - target(i, j));
      const double floor = 1e-10 * (1.0 + std::abs(target(i, j)));
      if (diff > 5.0 * se(i, j) + floor) ok = false;
      if (se(i, j) > 0.0) worst = std::max(worst, diff / se(i, j));
      else if (diff > floor) worst = std::numeric_limits<double>::infinity();
    }
  return worst;
}

CheckResult finish(int id, const char* name, bool passed, std::string detail,
                   const Timer& timer) {
  return CheckResult{id, name, passed, std::move(detail), timer.seconds()};
}

}  // namespace

std::string_view to_string(VerifyLevel level) {
  return level == VerifyLevel::Full ? "full" : "quick";
}

std::string_view to_string(Mutation mutation) {
  switch (mutation) {
    case Mutation::None:
      return "none";
    case Mutation::ProxUnsquared:
      return "prox-unsquared";
    case Mutation::JkoShift:
      return "jko-shift";
    case Mutation::ScaleOrientation:
      return "scale-orientation";
    case Mutation::ReparamCovarianceScale:
      return "reparam-covariance-scale";
  }
  return "?";
}

VerifyLevel parse_verify_level(std::string_view text) {
  if (text == "quick") return VerifyLevel::Quick;
  if (text == "full") return VerifyLevel::Full;
  throw InvalidParameters("unknown verify level '" + std::string(text) + "'");
}

Mutation parse_mutation(std::string_view text) {
  for (Mutation m : {Mutation::None, Mutation::ProxUnsquared, Mutation::JkoShift,
                     Mutation::ScaleOrientation,
                     Mutation::ReparamCovarianceScale})
    if (text == to_string(m)) return m;
  throw InvalidParameters("unknown mutation '" + std::string(text) + "'");
}

// 1. One exact-gradient step of either algorithm maps q* to itself.
CheckResult check_fixed_points(const SuiteOptions& options) {
  const Timer timer;
  const Operators ops{options.mutation};
  const Eigen::Index dims[] = {1, 2, 5, 20};
  std::mt19937_64 engine(kSuiteSeed + 1);
  std::uniform_real_distribution<double> log_kappa(0.0, 2.0);

  bool ok = true;
  double worst_ratio = 0.0;
  int failures = 0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index d = dims[i % 4];
    const double kappa = std::pow(10.0, log_kappa(engine));
    const QuadraticPotential target =
        make_random_quadratic(d, kappa, kSuiteSeed + 100 + i);
    const GaussianVariational q_star = quadratic_optimum(target);
    const double l = target.metadata().smoothness;
    const double k = target.metadata().condition_number();
    const double tolerance = 1e-18 * (1.0 + q_star.covariance().trace());
    const NoiseBatch none = NoiseBatch::from_draws(Matrix::Zero(d, 1));
    for (double gamma : {0.5 / l, 1.0 / (10.0 * l * k)}) {
      for (Algorithm algorithm : {Algorithm::SPBWGD, Algorithm::SPGD}) {
        double w2 = std::numeric_limits<double>::infinity();
        try {
          const GradientEstimate g =
              ops.estimate(EstimatorKind::Exact, geometry_of(algorithm),
                           target, q_star, none);
          const GaussianVariational out =
              algorithm == Algorithm::SPGD ? ops.spgd(q_star, g, gamma)
                                           : ops.spbwgd(q_star, g, gamma);
          w2 = w2_distance_sq(out, q_star);
        } catch (const Error&) {
        }
        worst_ratio = std::max(worst_ratio, w2 / tolerance);
        if (!(w2 <= tolerance)) {
          ok = false;
          ++failures;
        }
      }
    }
  }
  return finish(1, "fixed points", ok,
                fmt("200 steps from q*, %d failures, worst W2^2/tol = %.3g",
                    failures, worst_ratio),
                timer);
}

// 2. Monte Carlo means of every estimator match their closed forms.
CheckResult check_unbiasedness(const SuiteOptions& options) {
  const Timer timer;
  const Operators ops{options.mutation};
  const Eigen::Index d = 5;
  const Eigen::Index n = full(options) ? 1'000'000 : 100'000;
  const QuadraticPotential target = make_random_quadratic(d, 10.0, kSuiteSeed + 2);
  std::mt19937_64 engine(kSuiteSeed + 2);
  const GaussianVariational q = random_gaussian(engine, d);
  const Matrix& a = target.precision();

  MatrixMoments location(d, 1), p_scale(d, d), r_scale(d, d), p_cov(d, d),
      r_cov(d, d);
  const NoiseLineage lineage{kSuiteSeed + 2, streams::kGradient, 0};
  auto rng = make_engine(lineage);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(d, 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < d; ++i) eps(i, 0) = normal(rng);
    const NoiseBatch batch = NoiseBatch::from_draws(eps);
    const GradientEstimate pp = ops.estimate(
        EstimatorKind::BonnetPrice, Geometry::ParamScale, target, q, batch);
    const GradientEstimate rp = ops.estimate(
        EstimatorKind::BonnetReparam, Geometry::ParamScale, target, q, batch);
    const GradientEstimate pc = ops.estimate(
        EstimatorKind::BonnetPrice, Geometry::BWCovariance, target, q, batch);
    const GradientEstimate rc = ops.estimate(
        EstimatorKind::BonnetReparam, Geometry::BWCovariance, target, q, batch);
    location.add(pp.location_grad);
    p_scale.add(pp.scale_grad);
    r_scale.add(rp.scale_grad);
    p_cov.add(pc.scale_grad);
    r_cov.add(symmetrize(rc.scale_grad));
  }

  bool ok = true;
  const Vector loc_target = a * (q.mean() - target.center());
  const Matrix scale_target = tril(a * q.scale());
  const Matrix cov_target = 0.5 * a;
  const double z1 = worst_z(location.mean(), location.std_error(), loc_target, ok);
  const double z2 = worst_z(p_scale.mean(), p_scale.std_error(), scale_target, ok);
  const double z3 = worst_z(r_scale.mean(), r_scale.std_error(), scale_target, ok);
  const double z4 = worst_z(p_cov.mean(), p_cov.std_error(), cov_target, ok);
  const double z5 = worst_z(r_cov.mean(), r_cov.std_error(), cov_target, ok);
  return finish(2, "estimator unbiasedness", ok,
                fmt("M=%ld, worst |z|: bonnet %.2f, price_scale %.2f, "
                    "reparam_scale %.2f, price_cov %.2f, reparam_cov %.2f",
                    static_cast<long>(n), z1, z2, z3, z4, z5),
                timer);
}

// 3. price_scale agrees with finite differences of lambda -> E(q_lambda).
CheckResult check_scale_orientation(const SuiteOptions& options) {
  const Timer timer;
  const Operators ops{options.mutation};
  const Eigen::Index d = 4;
  const Eigen::Index n = full(options) ? 1'000'000 : 100'000;
  const QuadraticPotential target = make_random_quadratic(d, 8.0, kSuiteSeed + 3);
  std::mt19937_64 engine(kSuiteSeed + 3);
  const GaussianVariational q = random_gaussian(engine, d);
  const Matrix& a = target.precision();
  const Vector& b = target.center();

  const auto energy = [&](const Matrix& c) {
    const Vector r = q.mean() - b;
    return 0.5 * r.dot(a * r) + 0.5 * (a * c * c.transpose()).trace();
  };
  Matrix fd = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double h = 1e-5 * (1.0 + std::abs(q.scale()(i, j)));
      Matrix plus = q.scale(), minus = q.scale();
      plus(i, j) += h;
      minus(i, j) -= h;
      fd(i, j) = (energy(plus) - energy(minus)) / (2.0 * h);
    }

  MatrixMoments moments(d, d);
  auto rng = make_engine({kSuiteSeed + 3, streams::kGradient, 0});
  for (Eigen::Index k = 0; k < n; ++k) {
    const NoiseBatch batch =
        NoiseBatch::from_draws(standard_normal_matrix(rng, d, 1));
    moments.add(ops.estimate(EstimatorKind::BonnetPrice, Geometry::ParamScale,
                             target, q, batch)
                    .scale_grad);
  }
  const Matrix mean = moments.mean();
  const Matrix se = moments.std_error();
  bool ok = true;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double diff = std::abs(mean(i, j) - fd(i, j));
      const double tol = std::max(5.0 * se(i, j), 1e-5);
      worst = std::max(worst, diff / tol);
      if (diff > tol) ok = false;
    }
  return finish(3, "scale-gradient orientation vs finite differences", ok,
                fmt("M=%ld, worst |diff|/tol = %.3g", static_cast<long>(n),
                    worst),
                timer);
}

// 4. JKO is non-expansive in W2; the entropy prox is non-expansive in the
// Euclidean parameter norm.
CheckResult check_nonexpansiveness(const SuiteOptions& options) {
  const Timer timer;
  const Operators ops{options.mutation};
  const int pairs = 1000;
  std::mt19937_64 engine(kSuiteSeed + 4);
  std::uniform_int_distribution<int> dim_dist(1, 6);
  std::normal_distribution<double> normal(0.0, 1.0);

  double worst_jko = -std::numeric_limits<double>::infinity();
  double worst_prox = -std::numeric_limits<double>::infinity();
  bool ok = true;
  for (int i = 0; i < pairs; ++i) {
    const Eigen::Index d = dim_dist(engine);
    const GaussianVariational p = random_gaussian(engine, d);
    const GaussianVariational q = random_gaussian(engine, d);
    for (double gamma : {0.01, 0.1, 1.0}) {
      double margin = std::numeric_limits<double>::infinity();
      try {
        const GaussianVariational jp =
            GaussianVariational::from_covariance(p.mean(), ops.jko(p.covariance(), gamma));
        const GaussianVariational jq =
            GaussianVariational::from_covariance(q.mean(), ops.jko(q.covariance(), gamma));
        margin = std::sqrt(w2_distance_sq(jp, jq)) -
                 std::sqrt(w2_distance_sq(p, q));
      } catch (const Error&) {
      }
      worst_jko = std::max(worst_jko, margin);
      if (!(margin <= 1e-10)) ok = false;

      // Prox on arbitrary lower-triangular inputs, including non-positive
      // diagonals produced by large gradient steps.
      Matrix c1 = Matrix::Zero(d, d), c2 = Matrix::Zero(d, d);
      for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index s = 0; s <= r; ++s) {
          c1(r, s) = normal(engine);
          c2(r, s) = normal(engine);
        }
      const Vector m1 = Vector::NullaryExpr(d, [&] { return normal(engine); });
      const Vector m2 = Vector::NullaryExpr(d, [&] { return normal(engine); });
      const double before =
          std::sqrt((m1 - m2).squaredNorm() + (c1 - c2).squaredNorm());
      const double after = std::sqrt(
          (m1 - m2).squaredNorm() +
          (ops.prox(c1, gamma) - ops.prox(c2, gamma)).squaredNorm());
      const double prox_margin =
          std::isfinite(after) ? after - before
                               : std::numeric_limits<double>::infinity();
      worst_prox = std::max(worst_prox, prox_margin);
      if (!(prox_margin <= 1e-10)) ok = false;
    }
  }
  return finish(4, "JKO and prox non-expansiveness", ok,
                fmt("%d pairs x 3 steps, worst JKO margin %.3g, worst prox "
                    "margin %.3g",
                    pairs, worst_jko, worst_prox),
                timer);
}

// 5. Exact-gradient runs contract W2^2 by at least (1 - mu gamma) per step.
CheckResult check_contraction(const SuiteOptions& options) {
  const Timer timer;
  const Operators ops{options.mutation};
  const Eigen::Index d = 5;
  const QuadraticPotential target = make_random_quadratic(d, 10.0, kSuiteSeed + 5);
  const GaussianVariational q_star = quadratic_optimum(target);
  const double mu = target.metadata().strong_convexity;
  const double l = target.metadata().smoothness;
  const double gamma = 1.0 / (10.0 * l * target.metadata().condition_number());
  const double bound = (1.0 - mu * gamma) * (1.0 + 1e-8);
  const NoiseBatch none = NoiseBatch::from_draws(Matrix::Zero(d, 1));

  bool ok = true;
  double worst[2] = {0.0, 0.0};
  int idx = 0;
  for (Algorithm algorithm : {Algorithm::SPBWGD, Algorithm::SPGD}) {
    GaussianVariational q = GaussianVariational::isotropic(d, 0.34);
    double w2 = w2_distance_sq(q, q_star);
    for (int t = 0; t < 500; ++t) {
      double ratio = std::numeric_limits<double>::infinity();
      try {
        const GradientEstimate g = ops.estimate(
            EstimatorKind::Exact, geometry_of(algorithm), target, q, none);
        q = algorithm == Algorithm::SPGD ? ops.spgd(q, g, gamma)
                                         : ops.spbwgd(q, g, gamma);
        const double next = w2_distance_sq(q, q_star);
        ratio = next / w2;
        w2 = next;
      } catch (const Error&) {
      }
      worst[idx] = std::max(worst[idx], ratio);
      if (!(ratio <= bound)) {
        ok = false;
        break;
      }
    }
    ++idx;
  }
  return finish(5, "deterministic contraction", ok,
                fmt("bound %.9f, worst ratio SPBWGD %.9f, SPGD %.9f", bound,
                    worst[0], worst[1]),
                timer);
}

// 6. Bonnet-Price second moments respect 10 L kappa D_E + 10 d L.
CheckResult check_variance_bounds(const SuiteOptions& options) {
  const Timer timer;
  const Eigen::Index n = full(options) ? 100'000 : 10'000;
  std::mt19937_64 engine(kSuiteSeed + 6);
  bool ok = true;
  double worst = 0.0;
  int instance = 0;
  for (Eigen::Index d : {2, 5}) {
    for (double kappa : {2.0, 10.0}) {
      const QuadraticPotential target =
          make_random_quadratic(d, kappa, kSuiteSeed + 60 + instance++);
      const GaussianVariational q_star = quadratic_optimum(target);
      const double l = target.metadata().smoothness;
      const double k = target.metadata().condition_number();
      for (int j = 0; j < 5; ++j) {
        const GaussianVariational q = perturb(q_star, engine, 0.3 * (j + 1));
        const double d_e = bregman_energy_quadratic(q, q_star, target);
        const double bound =
            1.5 * (10.0 * l * k * d_e + 10.0 * static_cast<double>(d) * l);
        for (Geometry g : {Geometry::BWCovariance, Geometry::ParamScale}) {
          const MonteCarloMean m = estimator_second_moment(
              EstimatorKind::BonnetPrice, g, q, q_star, target, n,
              kSuiteSeed + 600 + static_cast<std::uint64_t>(instance * 10 + j));
          worst = std::max(worst, m.value / bound);
          if (!(m.value <= bound)) ok = false;
        }
      }
    }
  }
  return finish(6, "gradient variance bounds", ok,
                fmt("n=%ld, 40 probes, worst moment/bound = %.3g",
                    static_cast<long>(n), worst),
                timer);
}

// 7. Stochastic runs with the theorem schedule drive mu W2^2 down.
CheckResult check_stochastic_convergence(const SuiteOptions& options) {
  const Timer timer;
  const Eigen::Index d = 5;
  const std::uint64_t iterations = full(options) ? 5000 : 2000;
  const int seeds = full(options) ? 32 : 8;
  const int window = 100;
  const QuadraticPotential target = make_random_quadratic(d, 10.0, kSuiteSeed + 7);
  const GaussianVariational q_star = quadratic_optimum(target);
  const GaussianVariational q0 = GaussianVariational::isotropic(d, 0.34);
  const double mu = target.metadata().strong_convexity;
  const double delta_sq = mu * w2_distance_sq(q0, q_star);
  const StepSchedule schedule =
      theorem_schedule(mu, target.metadata().smoothness, d, delta_sq);

  bool ok = true;
  std::string detail = fmt("t*=%llu, tau=%.0f;",
                           static_cast<unsigned long long>(schedule.switch_time()),
                           schedule.offset());
  for (Algorithm algorithm : {Algorithm::SPBWGD, Algorithm::SPGD}) {
    OptimizerConfig config;
    config.algorithm = algorithm;
    config.estimator = EstimatorKind::BonnetPrice;
    config.minibatch = 8;
    config.max_iters = iterations;
    config.eval_samples = 2;
    std::vector<double> mean_w2(iterations + 1, 0.0);
    bool diverged = false;
    for (int s = 0; s < seeds; ++s) {
      const RunTrace trace =
          run(config, target, q0, schedule, kSuiteSeed + 700 + s, q_star);
      if (trace.diverged) {
        diverged = true;
        break;
      }
      for (std::size_t t = 0; t < trace.records.size(); ++t)
        mean_w2[t] += mu * *trace.records[t].w2_sq / seeds;
    }
    const double ratio = diverged ? INFINITY : mean_w2.back() / mean_w2.front();
    bool monotone = !diverged;
    double worst_rise = 0.0;
    double previous = INFINITY;
    for (std::size_t start = 1; start + window <= mean_w2.size(); start += window) {
      double avg = 0.0;
      for (int k = 0; k < window; ++k) avg += mean_w2[start + k] / window;
      if (avg > previous) {
        monotone = false;
        worst_rise = std::max(worst_rise, avg / previous - 1.0);
      }
      previous = avg;
    }
    if (!(ratio <= 0.01) || !monotone) ok = false;
    detail += fmt(" %s final/initial %.3g%s", std::string(to_string(algorithm)).c_str(),
                  ratio, monotone ? "" : fmt(" (window rise %.3g)", worst_rise).c_str());
  }
  detail += fmt(" [T=%llu, %d seeds]", static_cast<unsigned long long>(iterations), seeds);
  return finish(7, "stochastic convergence", ok, detail, timer);
}

// 8. Price tolerates step sizes at least as large as reparam on a
// ridge-logistic target.
CheckResult check_envelope(const SuiteOptions& options) {
  const Timer timer;
  const LogisticRidgePotential target(toy_logistic_dataset(60, 10, 20240501), 1.0);
  const GaussianVariational q0 = GaussianVariational::isotropic(target.dim(), 0.34);

  SweepSpec spec;
  spec.gammas = full(options) ? log_spaced(1e-4, 1.0, 17) : log_spaced(1e-3, 1.0, 10);
  spec.repetitions = full(options) ? 8 : 2;
  spec.iterations = full(options) ? 2000 : 500;
  spec.base_seed = kSuiteSeed + 800;
  spec.minibatch = 8;
  spec.trace_eval_samples = 2;
  spec.final_eval_samples = 4096;
  const std::vector<SweepCell> cells = run_sweep(spec, target, q0);

  bool ok = true;
  std::string detail;
  for (Algorithm algorithm : {Algorithm::SPGD, Algorithm::SPBWGD}) {
    // Mean final F per (gamma, estimator); any diverged seed poisons the cell.
    const auto cell_mean = [&](double gamma, EstimatorKind est) {
      double sum = 0.0;
      int count = 0;
      for (const SweepCell& c : cells)
        if (c.gamma == gamma && c.algorithm == algorithm && c.estimator == est) {
          if (c.diverged) return std::numeric_limits<double>::infinity();
          sum += c.final_free_energy;
          ++count;
        }
      return sum / count;
    };
    double best = std::numeric_limits<double>::infinity();
    for (double gamma : spec.gammas)
      for (EstimatorKind est : spec.estimators)
        best = std::min(best, cell_mean(gamma, est));
    double largest[2] = {0.0, 0.0};
    for (double gamma : spec.gammas) {
      if (cell_mean(gamma, EstimatorKind::BonnetPrice) <= best + 1.0)
        largest[0] = gamma;
      if (cell_mean(gamma, EstimatorKind::BonnetReparam) <= best + 1.0)
        largest[1] = gamma;
    }
    if (!(largest[0] >= largest[1]) || !std::isfinite(best)) ok = false;
    detail += fmt("%s: best F %.3f, largest gamma price %.3g vs reparam %.3g; ",
                  std::string(to_string(algorithm)).c_str(), best, largest[0],
                  largest[1]);
  }
  detail += fmt("[%zu gammas, R=%llu, T=%llu]", spec.gammas.size(),
                static_cast<unsigned long long>(spec.repetitions),
                static_cast<unsigned long long>(spec.iterations));
  return finish(8, "step-size envelope (price vs reparam)", ok, detail, timer);
}

// 9. free_energy_mc agrees with the closed form on quadratics.
CheckResult check_free_energy_oracle(const SuiteOptions&) {
  const Timer timer;
  std::mt19937_64 engine(kSuiteSeed + 9);
  std::uniform_int_distribution<int> dim_dist(1, 6);
  std::uniform_real_distribution<double> log_kappa(0.0, 2.0);
  bool ok = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index d = dim_dist(engine);
    const QuadraticPotential target = make_random_quadratic(
        d, std::pow(10.0, log_kappa(engine)), kSuiteSeed + 900 + i);
    const GaussianVariational q = random_gaussian(engine, d);
    const FreeEnergyEstimate mc =
        free_energy_mc(q, target, 4096, kSuiteSeed + 9000 + i);
    const double exact = free_energy_exact_quadratic(q, target);
    const double z = std::abs(mc.value - exact) / mc.std_error;
    worst = std::max(worst, z);
    if (!(z <= 5.0)) ok = false;
  }
  return finish(9, "free-energy oracle", ok,
                fmt("100 states, N=4096, worst |z| = %.2f", worst), timer);
}

// 10. W2 closed form vs Monte Carlo transport cost, push-forward identity and
// the Bregman sandwich.
CheckResult check_geometry_oracles(const SuiteOptions& options) {
  const Timer timer;
  std::mt19937_64 engine(kSuiteSeed + 10);
  const Eigen::Index n = full(options) ? 100'000 : 20'000;
  bool ok = true;

  // Monte Carlo cost of the optimal coupling.
  double worst_z = 0.0;
  for (int i = 0; i < 5; ++i) {
    const Eigen::Index d = 1 + i;
    const GaussianVariational p = random_gaussian(engine, d);
    const GaussianVariational q = random_gaussian(engine, d);
    const AffineMap map = optimal_transport_map(p, q);
    auto rng = make_engine({kSuiteSeed + 10, streams::kCoupling,
                            static_cast<std::uint64_t>(i)});
    const Matrix xs = (p.scale() * standard_normal_matrix(rng, d, n)).colwise() +
                      p.mean();
    const Vector costs = (xs - map.apply_columns(xs)).colwise().squaredNorm();
    const double mean = costs.mean();
    const double se = std::sqrt((costs.array() - mean).square().sum() /
                                (static_cast<double>(n) - 1.0) /
                                static_cast<double>(n));
    const double z = std::abs(mean - w2_distance_sq(p, q)) / se;
    worst_z = std::max(worst_z, z);
    if (!(z <= 5.0)) ok = false;
  }

  // Push-forward identity S Sigma_p S = Sigma_q.
  double worst_push = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index d = 1 + i % 6;
    const GaussianVariational p = random_gaussian(engine, d);
    const GaussianVariational q = random_gaussian(engine, d);
    const AffineMap map = optimal_transport_map(p, q);
    const Matrix sq = q.covariance();
    const double rel = (map.linear * p.covariance() * map.linear - sq).norm() /
                       sq.norm();
    worst_push = std::max(worst_push, rel);
    if (!(rel <= 1e-8)) ok = false;
  }

  // Bregman sandwich on quadratic targets.
  double worst_sandwich = -std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> log_kappa(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index d = 1 + i % 6;
    const QuadraticPotential target = make_random_quadratic(
        d, std::pow(10.0, log_kappa(engine)), kSuiteSeed + 1000 + i);
    const GaussianVariational q_star = quadratic_optimum(target);
    const GaussianVariational q = random_gaussian(engine, d);
    const double w2 = w2_distance_sq(q, q_star);
    const double d_e = bregman_energy_quadratic(q, q_star, target);
    const double lower = 0.5 * target.metadata().strong_convexity * w2;
    const double upper = 0.5 * target.metadata().smoothness * w2;
    const double slack = 1e-10 * (1.0 + upper);
    worst_sandwich = std::max({worst_sandwich, lower - d_e, d_e - upper});
    if (!(d_e >= lower - slack && d_e <= upper + slack)) ok = false;
  }
  return finish(10, "geometry oracles", ok,
                fmt("coupling cost worst |z| %.2f (n=%ld); push-forward worst "
                    "rel err %.2g; Bregman sandwich worst violation %.2g",
                    worst_z, static_cast<long>(n), worst_push, worst_sandwich),
                timer);
}

std::vector<CheckResult> run_suite(
    const SuiteOptions& options,
    const std::function<void(const CheckResult&)>& on_result) {
  using CheckFn = CheckResult (*)(const SuiteOptions&);
  const CheckFn checks[] = {
      check_fixed_points,        check_unbiasedness,
      check_scale_orientation,   check_nonexpansiveness,
      check_contraction,         check_variance_bounds,
      check_stochastic_convergence, check_envelope,
      check_free_energy_oracle,  check_geometry_oracles,
  };
  std::vector<CheckResult> results;
  for (CheckFn check : checks) {
    CheckResult r;
    try {
      r = check(options);
    } catch (const std::exception& e) {
      r.id = static_cast<int>(results.size()) + 1;
      r.name = "check";
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CheckResult& result) {
  std::ostringstream out;
  out << (result.passed ? "[PASS] " : "[FAIL] ") << fmt("%02d ", result.id)
      << result.name << fmt(" (%.2f s): ", result.seconds) << result.detail;
  return out.str();
}

}  // namespace bwvi
