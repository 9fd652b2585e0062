#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bwvi/diagnostics.hpp"
#include "bwvi/errors.hpp"
#include "bwvi/schedules.hpp"

namespace bwvi::cli {
namespace {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

const json* find(const json& object, const char* key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

double get_positive(const json& object, const char* key, double fallback,
                    const std::string& path) {
  const json* node = find(object, key);
  if (node == nullptr) return fallback;
  if (!node->is_number()) throw ConfigError(path + key, "must be a number");
  const double v = node->get<double>();
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(path + key, "must be positive");
  return v;
}

std::uint64_t get_count(const json& object, const char* key,
                        std::uint64_t fallback, std::uint64_t minimum,
                        const std::string& path) {
  const json* node = find(object, key);
  if (node == nullptr) return fallback;
  if (!node->is_number_integer())
    throw ConfigError(path + key, "must be an integer");
  const auto v = node->get<std::int64_t>();
  if (v < static_cast<std::int64_t>(minimum))
    throw ConfigError(path + key,
                      "must be >= " + std::to_string(minimum) + " (got " +
                          std::to_string(v) + ")");
  return static_cast<std::uint64_t>(v);
}

std::string get_string(const json& object, const char* key,
                       const std::string& path) {
  const json* node = find(object, key);
  if (node == nullptr) throw ConfigError(path + key, "is required");
  if (!node->is_string()) throw ConfigError(path + key, "must be a string");
  return node->get<std::string>();
}

template <typename T, typename Parse>
std::vector<T> get_choice_list(const json& root, const char* single,
                               const char* plural, Parse parse) {
  std::vector<T> out;
  if (const json* node = find(root, single)) {
    if (!node->is_string()) throw ConfigError(single, "must be a string");
    try {
      out.push_back(parse(node->get<std::string>()));
    } catch (const InvalidParameters& e) {
      throw ConfigError(single, e.what());
    }
  }
  if (const json* node = find(root, plural)) {
    if (!out.empty())
      throw ConfigError(plural, std::string("conflicts with '") + single + "'");
    if (!node->is_array() || node->empty())
      throw ConfigError(plural, "must be a non-empty array of strings");
    for (const json& item : *node) {
      if (!item.is_string())
        throw ConfigError(plural, "must be a non-empty array of strings");
      try {
        out.push_back(parse(item.get<std::string>()));
      } catch (const InvalidParameters& e) {
        throw ConfigError(plural, e.what());
      }
    }
  }
  return out;
}

bool has_any_key(const std::string& json_text, const char* a, const char* b) {
  const json root = json::parse(json_text);
  return root.contains(a) || root.contains(b);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Runs `task(i)` for i in [0, n) on up to `workers` threads.
template <typename Task>
void parallel_for(std::size_t n, unsigned workers, Task task) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  const auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

// Opens the requested output, or returns nullptr to mean `fallback`.
std::unique_ptr<std::ofstream> open_output(
    const std::optional<std::filesystem::path>& path) {
  if (!path) return nullptr;
  auto file = std::make_unique<std::ofstream>(*path, std::ios::binary);
  if (!*file) throw IoError("cannot write '" + path->string() + "'");
  return file;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<document>", "must be an object");

  ExperimentConfig c;

  const json* target = find(root, "target");
  if (target == nullptr || !target->is_object())
    throw ConfigError("target", "is required and must be an object");
  const std::string type = get_string(*target, "type", "target.");
  if (type == "quadratic") {
    QuadraticTargetSpec q;
    q.dim = static_cast<Eigen::Index>(get_count(*target, "dim", 2, 1, "target."));
    q.condition_number =
        get_positive(*target, "condition_number", 1.0, "target.");
    if (q.condition_number < 1.0)
      throw ConfigError("target.condition_number", "must be >= 1");
    q.seed = get_count(*target, "seed", 0, 0, "target.");
    c.quadratic = q;
  } else if (type == "logistic") {
    LogisticTargetSpec l;
    std::filesystem::path dataset = get_string(*target, "dataset", "target.");
    if (dataset.is_relative() && !base_dir.empty()) dataset = base_dir / dataset;
    l.dataset = dataset;
    l.ridge = get_positive(*target, "ridge", 1.0, "target.");
    c.logistic = l;
  } else {
    throw ConfigError("target.type",
                      "must be 'quadratic' or 'logistic', got '" + type + "'");
  }

  auto algorithms =
      get_choice_list<Algorithm>(root, "algorithm", "algorithms", parse_algorithm);
  if (!algorithms.empty()) c.algorithms = std::move(algorithms);
  auto estimators = get_choice_list<EstimatorKind>(root, "estimator", "estimators",
                                                   parse_estimator_kind);
  if (!estimators.empty()) c.estimators = std::move(estimators);
  for (EstimatorKind e : c.estimators)
    if (e == EstimatorKind::Exact && !c.quadratic)
      throw ConfigError("estimator", "exact gradients need a quadratic target");

  c.minibatch =
      static_cast<Eigen::Index>(get_count(root, "minibatch", 8, 1, ""));
  c.iterations = get_count(root, "iterations", 1000, 0, "");

  if (const json* schedule = find(root, "schedule")) {
    if (!schedule->is_object())
      throw ConfigError("schedule", "must be an object");
    const std::string kind = get_string(*schedule, "type", "schedule.");
    if (kind == "constant") {
      c.schedule.kind = ScheduleSpec::Kind::Constant;
      if (find(*schedule, "gamma") == nullptr)
        throw ConfigError("schedule.gamma", "is required");
      c.schedule.gamma = get_positive(*schedule, "gamma", 0.0, "schedule.");
    } else if (kind == "theorem") {
      c.schedule.kind = ScheduleSpec::Kind::Theorem;
      if (const json* d = find(*schedule, "delta_sq")) {
        if (!d->is_number() || !(d->get<double>() >= 0.0))
          throw ConfigError("schedule.delta_sq", "must be a number >= 0");
        c.schedule.delta_sq = d->get<double>();
      } else if (!c.quadratic) {
        throw ConfigError("schedule.delta_sq",
                          "is required for non-quadratic targets");
      }
    } else {
      throw ConfigError("schedule.type",
                        "must be 'constant' or 'theorem', got '" + kind + "'");
    }
  }

  if (const json* init = find(root, "init")) {
    if (!init->is_object()) throw ConfigError("init", "must be an object");
    c.init_variance = get_positive(*init, "variance", 0.34, "init.");
    if (const json* mean = find(*init, "mean")) {
      if (mean->is_number()) {
        c.init_mean.assign(1, mean->get<double>());
      } else if (mean->is_array()) {
        for (const json& v : *mean) {
          if (!v.is_number())
            throw ConfigError("init.mean", "must contain numbers");
          c.init_mean.push_back(v.get<double>());
        }
      } else {
        throw ConfigError("init.mean", "must be a number or an array");
      }
    }
  }

  c.eval_samples =
      static_cast<Eigen::Index>(get_count(root, "eval_samples", 4096, 2, ""));
  c.repetitions = get_count(root, "repetitions", 1, 1, "");
  c.seed = get_count(root, "seed", 0, 0, "");
  c.divergence_threshold =
      get_positive(root, "divergence_threshold", 1e12, "");
  c.workers = static_cast<unsigned>(get_count(root, "workers", 1, 1, ""));
  if (const json* output = find(root, "output")) {
    if (!output->is_string()) throw ConfigError("output", "must be a string");
    c.output = output->get<std::string>();
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  ExperimentConfig config = parse_config(text, path.parent_path());
  if (const char* env = std::getenv("BWVI_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ConfigError("BWVI_SEED", "must be a nonnegative integer");
    config.seed = seed;
  }
  return config;
}

std::unique_ptr<Potential> make_target(const ExperimentConfig& config) {
  if (config.quadratic)
    return std::make_unique<QuadraticPotential>(make_random_quadratic(
        config.quadratic->dim, config.quadratic->condition_number,
        config.quadratic->seed));
  return std::make_unique<LogisticRidgePotential>(
      load_logistic_dataset(config.logistic->dataset), config.logistic->ridge);
}

GaussianVariational make_initial(const ExperimentConfig& config,
                                 Eigen::Index dim) {
  Vector mean = Vector::Zero(dim);
  if (config.init_mean.size() == 1) {
    mean.setConstant(config.init_mean[0]);
  } else if (!config.init_mean.empty()) {
    if (static_cast<Eigen::Index>(config.init_mean.size()) != dim)
      throw ConfigError("init.mean", "length " +
                                         std::to_string(config.init_mean.size()) +
                                         " does not match target dimension " +
                                         std::to_string(dim));
    for (Eigen::Index i = 0; i < dim; ++i)
      mean(i) = config.init_mean[static_cast<std::size_t>(i)];
  }
  return GaussianVariational(
      std::move(mean),
      std::sqrt(config.init_variance) * Matrix::Identity(dim, dim));
}

void write_trace_header(std::ostream& out) {
  out << "run_id,seed,t,gamma,free_energy,free_energy_se,w2_sq,diverged\n";
}

void write_trace_rows(std::ostream& out, std::uint64_t run_id,
                      const RunTrace& trace) {
  for (const TraceRecord& r : trace.records) {
    out << run_id << ',' << trace.seed << ',' << r.t << ','
        << format_double(r.gamma) << ',' << format_double(r.free_energy) << ','
        << format_double(r.free_energy_se) << ','
        << (r.w2_sq ? format_double(*r.w2_sq) : std::string()) << ','
        << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_sweep_header(std::ostream& out) {
  out << "gamma,algorithm,estimator,seed,final_free_energy,diverged\n";
}

void write_sweep_rows(std::ostream& out, const std::vector<SweepCell>& cells) {
  for (const SweepCell& c : cells) {
    out << format_double(c.gamma) << ',' << to_string(c.algorithm) << ','
        << to_string(c.estimator) << ',' << c.seed << ','
        << format_double(c.final_free_energy) << ',' << (c.diverged ? 1 : 0)
        << '\n';
  }
}

namespace {

StepSchedule make_schedule(const ExperimentConfig& config,
                           const Potential& target,
                           const GaussianVariational& q0) {
  if (config.schedule.kind == ScheduleSpec::Kind::Constant)
    return constant_schedule(config.schedule.gamma);
  const PotentialMetadata& meta = target.metadata();
  double delta_sq = 0.0;
  if (config.schedule.delta_sq) {
    delta_sq = *config.schedule.delta_sq;
  } else {
    const auto& quadratic = dynamic_cast<const QuadraticPotential&>(target);
    delta_sq =
        meta.strong_convexity * w2_distance_sq(q0, quadratic_optimum(quadratic));
  }
  return theorem_schedule(meta.strong_convexity, meta.smoothness,
                          static_cast<long>(meta.dim), delta_sq);
}

// Maps library exceptions onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_config(options.config);
    if (config.algorithms.size() != 1)
      throw ConfigError("algorithms", "run takes exactly one algorithm");
    if (config.estimators.size() != 1)
      throw ConfigError("estimators", "run takes exactly one estimator");
    const auto target = make_target(config);
    const GaussianVariational q0 = make_initial(config, target->dim());
    const StepSchedule schedule = make_schedule(config, *target, q0);

    OptimizerConfig opt;
    opt.algorithm = config.algorithms.front();
    opt.estimator = config.estimators.front();
    opt.minibatch = config.minibatch;
    opt.max_iters = config.iterations;
    opt.eval_samples = config.eval_samples;
    opt.divergence_threshold = config.divergence_threshold;

    std::vector<std::optional<RunTrace>> traces(config.repetitions);
    parallel_for(traces.size(), options.workers.value_or(config.workers),
                 [&](std::size_t r) {
                   traces[r] =
                       run(opt, *target, q0, schedule, config.seed + r);
                 });

    auto file = open_output(options.out ? options.out : config.output);
    std::ostream& sink = file ? *file : out;
    write_trace_header(sink);
    for (std::size_t r = 0; r < traces.size(); ++r)
      write_trace_rows(sink, r, *traces[r]);
    sink.flush();
    if (!sink) throw IoError("failed writing trace output");
    return kExitOk;
  });
}

int cmd_sweep(const SweepOptions& options, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const std::string text = read_file(options.config);
    ExperimentConfig config = load_config(options.config);
    // Sweep defaults: every algorithm, both stochastic estimators, T = 4000,
    // R = 32.
    if (!has_any_key(text, "algorithm", "algorithms"))
      config.algorithms = {Algorithm::SPGD, Algorithm::SPBWGD};
    if (!has_any_key(text, "estimator", "estimators"))
      config.estimators = {EstimatorKind::BonnetPrice,
                           EstimatorKind::BonnetReparam};
    const json root = json::parse(text);
    if (!root.contains("iterations")) config.iterations = 4000;
    if (!root.contains("repetitions")) config.repetitions = 32;
    const auto target = make_target(config);
    const GaussianVariational q0 = make_initial(config, target->dim());

    SweepSpec spec;
    try {
      spec.gammas = log_spaced(options.gamma_min, options.gamma_max,
                               options.points);
    } catch (const InvalidParameters& e) {
      throw ConfigError("--gamma-min/--gamma-max/--points", e.what());
    }
    spec.algorithms = config.algorithms;
    spec.estimators = config.estimators;
    spec.base_seed = config.seed;
    spec.repetitions = config.repetitions;
    spec.iterations = config.iterations;
    spec.minibatch = config.minibatch;
    spec.final_eval_samples = config.eval_samples;
    spec.divergence_threshold = config.divergence_threshold;
    spec.workers = options.workers.value_or(config.workers);
    const std::vector<SweepCell> cells = run_sweep(spec, *target, q0);

    auto file = open_output(options.out ? options.out : config.output);
    std::ostream& sink = file ? *file : out;
    write_sweep_header(sink);
    write_sweep_rows(sink, cells);
    sink.flush();
    if (!sink) throw IoError("failed writing sweep output");
    return kExitOk;
  });
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  SuiteOptions suite{options.level, options.mutation};
  out << "bwvi verify --level " << to_string(options.level);
  if (options.mutation != Mutation::None)
    out << " --mutate " << to_string(options.mutation);
  out << '\n';
  int failed = 0;
  run_suite(suite, [&](const CheckResult& r) {
    out << format_result(r) << std::endl;
    if (!r.passed) ++failed;
  });
  out << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed")
      << '\n';
  return failed == 0 ? kExitOk : kExitFailure;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Gaussian variational inference with SPGD and SPBWGD"};
  app.require_subcommand(1);

  RunOptions run_options;
  std::string run_out;
  unsigned run_workers = 0;
  auto* run_cmd = app.add_subcommand("run", "Run the optimizer from a JSON config");
  run_cmd->add_option("config", run_options.config, "Experiment config (JSON)")
      ->required();
  run_cmd->add_option("--out", run_out, "Trace CSV path (default: stdout)");
  run_cmd->add_option("--workers", run_workers, "Concurrent repetitions");

  SweepOptions sweep_options;
  std::string sweep_out;
  unsigned sweep_workers = 0;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Constant step-size sweep over a log grid");
  sweep_cmd->add_option("config", sweep_options.config, "Experiment config (JSON)")
      ->required();
  sweep_cmd->add_option("--gamma-min", sweep_options.gamma_min, "Smallest step")
      ->capture_default_str();
  sweep_cmd->add_option("--gamma-max", sweep_options.gamma_max, "Largest step")
      ->capture_default_str();
  sweep_cmd->add_option("--points", sweep_options.points, "Grid points")
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Summary CSV path (default: stdout)");
  sweep_cmd->add_option("--workers", sweep_workers, "Concurrent cells");

  std::string level = "quick";
  std::string mutation = "none";
  auto* verify_cmd = app.add_subcommand("verify", "Run the property suite");
  verify_cmd->add_option("--level", level, "quick or full")
      ->check(CLI::IsMember({"quick", "full"}))
      ->capture_default_str();
  verify_cmd
      ->add_option("--mutate", mutation,
                   "Corrupt one update formula to test suite sensitivity")
      ->check(CLI::IsMember({"none", "prox-unsquared", "jko-shift",
                             "scale-orientation", "reparam-covariance-scale"}))
      ->capture_default_str();

  std::size_t data_rows = 60;
  std::size_t data_features = 10;
  std::uint64_t data_seed = 20240501;
  std::string data_out;
  auto* data_cmd = app.add_subcommand(
      "dataset", "Write a synthetic logistic-regression dataset as CSV");
  data_cmd->add_option("--rows", data_rows)->capture_default_str();
  data_cmd->add_option("--features", data_features)->capture_default_str();
  data_cmd->add_option("--seed", data_seed)->capture_default_str();
  data_cmd->add_option("--out", data_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) {
    if (!run_out.empty()) run_options.out = run_out;
    if (run_workers > 0) run_options.workers = run_workers;
    return cmd_run(run_options, std::cout, std::cerr);
  }
  if (*sweep_cmd) {
    if (!sweep_out.empty()) sweep_options.out = sweep_out;
    if (sweep_workers > 0) sweep_options.workers = sweep_workers;
    return cmd_sweep(sweep_options, std::cout, std::cerr);
  }
  if (*data_cmd) {
    return guarded(std::cerr, [&] {
      write_logistic_dataset(
          toy_logistic_dataset(static_cast<Eigen::Index>(data_rows),
                               static_cast<Eigen::Index>(data_features),
                               data_seed),
          data_out);
      return kExitOk;
    });
  }
  VerifyOptions verify_options{parse_verify_level(level),
                               parse_mutation(mutation)};
  return cmd_verify(verify_options, std::cout);
}

}  // namespace bwvi::cli
