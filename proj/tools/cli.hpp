#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bwvi/optimizers.hpp"
#include "bwvi/sweep.hpp"
#include "bwvi/targets.hpp"
#include "bwvi/verification.hpp"

namespace bwvi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Configuration problem; `field` names the offending JSON key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct QuadraticTargetSpec {
  Eigen::Index dim = 2;
  double condition_number = 1.0;
  std::uint64_t seed = 0;
};

struct LogisticTargetSpec {
  std::filesystem::path dataset;
  double ridge = 1.0;
};

struct ScheduleSpec {
  enum class Kind { Constant, Theorem } kind = Kind::Constant;
  double gamma = 1e-3;
  /// mu W2(q0, q*)^2; computed exactly for quadratic targets when absent.
  std::optional<double> delta_sq;
};

struct ExperimentConfig {
  std::optional<QuadraticTargetSpec> quadratic;
  std::optional<LogisticTargetSpec> logistic;
  std::vector<Algorithm> algorithms{Algorithm::SPBWGD};
  std::vector<EstimatorKind> estimators{EstimatorKind::BonnetPrice};
  Eigen::Index minibatch = 8;
  std::uint64_t iterations = 1000;
  ScheduleSpec schedule;
  /// Empty means the zero vector; a single value is broadcast.
  std::vector<double> init_mean;
  double init_variance = 0.34;
  Eigen::Index eval_samples = 4096;
  std::uint64_t repetitions = 1;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e12;
  std::optional<std::filesystem::path> output;
  unsigned workers = 1;
};

/// Parses and validates a JSON document. Relative dataset paths are resolved
/// against `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});

/// Reads the file (IoError when unreadable), then parse_config; applies the
/// BWVI_SEED environment override.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws IoError / ParseError / LabelError for dataset problems.
std::unique_ptr<Potential> make_target(const ExperimentConfig& config);
GaussianVariational make_initial(const ExperimentConfig& config,
                                 Eigen::Index dim);

void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, std::uint64_t run_id,
                      const RunTrace& trace);
void write_sweep_header(std::ostream& out);
void write_sweep_rows(std::ostream& out, const std::vector<SweepCell>& cells);

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> workers;
};

struct SweepOptions {
  std::filesystem::path config;
  double gamma_min = 1e-8;
  double gamma_max = 1.0;
  int points = 33;
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> workers;
};

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::Quick;
  Mutation mutation = Mutation::None;
};

/// Exit codes: 0 success, 2 configuration error, 3 I/O error.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& options, std::ostream& out,
              std::ostream& err);
/// Exit 0 iff every check passes, 1 otherwise.
int cmd_verify(const VerifyOptions& options, std::ostream& out);

/// Full command-line entry point.
int main_entry(int argc, char** argv);

}  // namespace bwvi::cli
