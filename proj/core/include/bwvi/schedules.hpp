#pragma once

#include <cstdint>
#include <limits>

namespace bwvi {

/// Two-stage step size: gamma_0 for t < t*, then
/// (1/mu) (2(t + tau) + 1) / (t + tau + 1)^2.
class StepSchedule {
 public:
  static constexpr std::uint64_t kNever =
      std::numeric_limits<std::uint64_t>::max();

  /// Throws InvalidParameters unless base_step > 0, mu > 0, offset >= 0.
  StepSchedule(double base_step, double strong_convexity,
               std::uint64_t switch_time, double offset);

  double base_step() const { return base_step_; }
  double strong_convexity() const { return strong_convexity_; }
  std::uint64_t switch_time() const { return switch_time_; }
  double offset() const { return offset_; }
  bool is_constant() const { return switch_time_ == kNever; }

  double step_at(std::uint64_t t) const;

 private:
  double base_step_;
  double strong_convexity_;
  std::uint64_t switch_time_;
  double offset_;
};

/// Parameters prescribed by the convergence theorems:
/// gamma_0 = 1/(10 L kappa), tau = 8 kappa and
/// t* = ceil(log(kappa Delta^2 / d) / log(1 / (1 - 1/(10 kappa^2)))),
/// clamped at 0 when the log argument is <= 1.
/// `delta_sq` is mu W2(q_0, q_*)^2. Throws InvalidParameters if L < mu.
StepSchedule theorem_schedule(double mu, double l, long dim, double delta_sq);

/// step_at(t) = gamma for every t. Throws InvalidParameters if gamma <= 0.
StepSchedule constant_schedule(double gamma);

}  // namespace bwvi
