#include "bwvi/schedules.hpp"

#include <cmath>
#include <string>

#include "bwvi/errors.hpp"

namespace bwvi {

StepSchedule::StepSchedule(double base_step, double strong_convexity,
                           std::uint64_t switch_time, double offset)
    : base_step_(base_step),
      strong_convexity_(strong_convexity),
      switch_time_(switch_time),
      offset_(offset) {
  if (!(base_step_ > 0.0) || !std::isfinite(base_step_))
    throw InvalidParameters("step size must be positive, got " +
                            std::to_string(base_step_));
  if (!(strong_convexity_ > 0.0) || !std::isfinite(strong_convexity_))
    throw InvalidParameters("schedule strong convexity must be positive");
  if (!(offset_ >= 0.0) || !std::isfinite(offset_))
    throw InvalidParameters("schedule offset must be nonnegative");
}

double StepSchedule::step_at(std::uint64_t t) const {
  if (t < switch_time_) return base_step_;
  const double s = static_cast<double>(t) + offset_;
  return (2.0 * s + 1.0) / ((s + 1.0) * (s + 1.0)) / strong_convexity_;
}

StepSchedule theorem_schedule(double mu, double l, long dim, double delta_sq) {
  if (!(mu > 0.0) || !(l >= mu) || !std::isfinite(l))
    throw InvalidParameters("theorem_schedule requires L >= mu > 0");
  if (dim < 1) throw InvalidParameters("theorem_schedule requires d >= 1");
  if (!(delta_sq >= 0.0) || !std::isfinite(delta_sq))
    throw InvalidParameters("theorem_schedule requires Delta^2 >= 0");

  const double kappa = l / mu;
  const double base_step = 1.0 / (10.0 * l * kappa);
  const double offset = 8.0 * kappa;

  std::uint64_t switch_time = 0;
  const double argument = kappa * delta_sq / static_cast<double>(dim);
  if (argument > 1.0) {
    const double rate = -std::log1p(-1.0 / (10.0 * kappa * kappa));
    switch_time =
        static_cast<std::uint64_t>(std::ceil(std::log(argument) / rate));
  }
  return StepSchedule(base_step, mu, switch_time, offset);
}

StepSchedule constant_schedule(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw InvalidParameters("constant step size must be positive");
  // The decay branch is never reached; mu only has to be valid.
  return StepSchedule(gamma, 1.0, StepSchedule::kNever, 0.0);
}

}  // namespace bwvi
