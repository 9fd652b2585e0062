#include "bwvi/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "bwvi/diagnostics.hpp"
#include "bwvi/errors.hpp"

namespace bwvi {

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1 || !std::isfinite(hi))
    throw InvalidParameters("log_spaced requires 0 < lo <= hi and n >= 1");
  if (n == 1) {
    if (lo != hi) throw InvalidParameters("log_spaced with n = 1 needs lo == hi");
    return {lo};
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        std::pow(10.0, a + (b - a) * static_cast<double>(i) / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<SweepCell> run_sweep(const SweepSpec& spec, const Potential& target,
                                 const GaussianVariational& q0) {
  if (spec.gammas.empty() || spec.algorithms.empty() ||
      spec.estimators.empty() || spec.repetitions < 1)
    throw InvalidParameters("sweep grid is empty");
  if (spec.final_eval_samples < 2)
    throw InvalidParameters("final_eval_samples must be >= 2");

  std::vector<SweepCell> cells;
  for (double gamma : spec.gammas)
    for (Algorithm algorithm : spec.algorithms)
      for (EstimatorKind estimator : spec.estimators)
        for (std::uint64_t r = 0; r < spec.repetitions; ++r)
          cells.push_back(SweepCell{gamma, algorithm, estimator,
                                    spec.base_seed + r, 0.0, false});

  // Validate shared configuration once, on the calling thread.
  OptimizerConfig base;
  base.minibatch = spec.minibatch;
  base.max_iters = spec.iterations;
  base.eval_samples = spec.trace_eval_samples;
  base.divergence_threshold = spec.divergence_threshold;
  validate(base);
  for (double gamma : spec.gammas) (void)constant_schedule(gamma);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& cell = cells[i];
      try {
        OptimizerConfig config = base;
        config.algorithm = cell.algorithm;
        config.estimator = cell.estimator;
        const RunTrace trace = run(config, target, q0,
                                   constant_schedule(cell.gamma), cell.seed);
        cell.diverged = trace.diverged;
        if (cell.diverged) {
          cell.final_free_energy = std::numeric_limits<double>::infinity();
          continue;
        }
        const FreeEnergyEstimate f = free_energy_mc(
            trace.terminal, target, spec.final_eval_samples,
            {cell.seed, streams::kEvaluation, spec.iterations + 1});
        cell.final_free_energy = f.value;
        if (!std::isfinite(f.value) || f.value > spec.divergence_threshold) {
          cell.diverged = true;
          cell.final_free_energy = std::numeric_limits<double>::infinity();
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const unsigned n_threads = std::max(
      1u, std::min<unsigned>(spec.workers, static_cast<unsigned>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return cells;
}

}  // namespace bwvi
