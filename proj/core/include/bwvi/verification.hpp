#pragma once

// Executable property suite: fixed points, estimator unbiasedness, gradient
// orientation, non-expansiveness, contraction, variance bounds, stochastic
// convergence, the step-size envelope and the closed-form oracles.
//
// Every check can run against deliberately corrupted update formulas
// (Mutation) so that the suite's sensitivity is itself testable.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bwvi {

enum class VerifyLevel { Quick, Full };

enum class Mutation {
  None,
  /// Entropy prox diagonal as (C_ii + sqrt(C_ii + 4 gamma)) / 2.
  ProxUnsquared,
  /// JKO with gamma I in place of 2 gamma I.
  JkoShift,
  /// Price scale gradient as tril(C^T H) instead of tril(H C).
  ScaleOrientation,
  /// Sigma-space reparametrization estimator without the factor 1/2.
  ReparamCovarianceScale,
};

std::string_view to_string(VerifyLevel level);
std::string_view to_string(Mutation mutation);
/// Throws InvalidParameters on an unknown name.
VerifyLevel parse_verify_level(std::string_view text);
Mutation parse_mutation(std::string_view text);

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  VerifyLevel level = VerifyLevel::Quick;
  Mutation mutation = Mutation::None;
};

CheckResult check_fixed_points(const SuiteOptions& options);
CheckResult check_unbiasedness(const SuiteOptions& options);
CheckResult check_scale_orientation(const SuiteOptions& options);
CheckResult check_nonexpansiveness(const SuiteOptions& options);
CheckResult check_contraction(const SuiteOptions& options);
CheckResult check_variance_bounds(const SuiteOptions& options);
CheckResult check_stochastic_convergence(const SuiteOptions& options);
CheckResult check_envelope(const SuiteOptions& options);
CheckResult check_free_energy_oracle(const SuiteOptions& options);
CheckResult check_geometry_oracles(const SuiteOptions& options);

/// All checks in id order. `on_result` (optional) sees each result as soon
/// as it is available.
std::vector<CheckResult> run_suite(
    const SuiteOptions& options,
    const std::function<void(const CheckResult&)>& on_result = {});

/// "[PASS] 01 fixed points (0.12 s): detail"
std::string format_result(const CheckResult& result);

}  // namespace bwvi
