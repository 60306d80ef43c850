#include "epoal/harness.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

namespace epoal {

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi) || n < 2) {
    throw std::invalid_argument("log_grid: need 0 < lo < hi and n >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(n));
  // Weighted average of base-10 exponents, so decade points come out exact.
  const double log_lo = std::log10(lo);
  const double log_hi = std::log10(hi);
  for (int i = 0; i < n; ++i) {
    const double exponent = (log_lo * (n - 1 - i) + log_hi * i) / (n - 1);
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, exponent);
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

GridSpec GridSpec::standard() {
  GridSpec grid;
  grid.mu_grid = log_grid(1e-3, 1e-1, 10);
  grid.eta_grid = log_grid(1e-1, 1e2, 10);
  grid.tau_grid = log_grid(1e-2, 10.0, 10);
  return grid;
}

void GridSpec::validate() const {
  auto check = [](const std::vector<double>& values, const char* name) {
    if (values.empty()) throw std::invalid_argument(std::string(name) + " grid is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i]) || (i && !(values[i] > values[i - 1]))) {
        throw std::invalid_argument(std::string(name) + " grid must be positive and increasing");
      }
    }
  };
  check(mu_grid, "mu");
  check(eta_grid, "eta");
  check(tau_grid, "tau");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
}

std::vector<SolverConfig> GridSpec::configs(Algorithm algorithm, std::uint64_t seed) const {
  std::vector<SolverConfig> out;
  for (double mu : mu_grid) {
    SolverConfig base;
    base.mu = mu;
    base.max_iter = max_iter;
    base.seed = seed;
    switch (algorithm) {
      case Algorithm::Subgradient:
        out.push_back(base);
        break;
      case Algorithm::EpoAl:
        for (double eta : eta_grid) {
          SolverConfig c = base;
          c.eta = eta;
          out.push_back(c);
        }
        break;
      case Algorithm::SmoothMax:
        for (double tau : tau_grid) {
          SolverConfig c = base;
          c.tau = tau;
          out.push_back(c);
        }
        break;
    }
  }
  return out;
}

double compute_target(const ObjectiveSet& problem, const PreferenceVector& r, const ModelVector& w0,
                      const GridSpec& grid, std::uint64_t tie_seed) {
  grid.validate();
  double best = std::numeric_limits<double>::infinity();
  bool any_completed = false;
  for (const SolverConfig& config : grid.configs(Algorithm::Subgradient, tie_seed)) {
    double run_best = std::numeric_limits<double>::infinity();
    try {
      run(Algorithm::Subgradient, problem, r, w0, config,
          [&run_best](const IterationRecord& rec) { run_best = std::min(run_best, rec.minmax); });
      any_completed = true;
    } catch (const DivergenceError&) {
      // Finite iterates seen before divergence still count.
    }
    best = std::min(best, run_best);
  }
  if (!any_completed || !std::isfinite(best)) {
    throw HarnessError("compute_target: every subgradient run diverged");
  }
  return best;
}

std::optional<long> iteration_complexity(std::span<const double> minmax, double target,
                                         double epsilon) {
  if (minmax.empty()) throw std::invalid_argument("iteration_complexity: empty trace");
  if (!(epsilon > 0.0)) throw std::invalid_argument("iteration_complexity: epsilon must be > 0");
  for (std::size_t i = 0; i < minmax.size(); ++i) {
    if (std::abs(minmax[i] - target) <= epsilon) return static_cast<long>(i);
  }
  return std::nullopt;
}

std::optional<long> iteration_complexity(const std::vector<IterationRecord>& trace, double target,
                                         double epsilon) {
  if (trace.empty()) throw std::invalid_argument("iteration_complexity: empty trace");
  std::vector<double> minmax(trace.size());
  std::transform(trace.begin(), trace.end(), minmax.begin(),
                 [](const IterationRecord& rec) { return rec.minmax; });
  return iteration_complexity(minmax, target, epsilon);
}

TrialRecord tune(Algorithm algorithm, const ObjectiveSet& problem, const PreferenceVector& r,
                 const ModelVector& w0, const GridSpec& grid, std::uint64_t seed,
                 std::optional<double> target) {
  grid.validate();
  const std::uint64_t tie_seed = derive_seed(seed, SeedDomain::TieBreak);

  TrialRecord trial;
  trial.algorithm = algorithm;
  trial.K = problem.count();
  trial.d = problem.dim();
  trial.seed = seed;
  trial.target = target ? *target : compute_target(problem, r, w0, grid, tie_seed);

  const std::vector<SolverConfig> configs = grid.configs(algorithm, tie_seed);
  trial.best_config = configs.front();
  for (const SolverConfig& config : configs) {
    std::optional<long> hit;
    ++trial.tuning_runs;
    try {
      // Only the first entry into the epsilon band matters, so stop there.
      run_while(algorithm, problem, r, w0, config, [&](const IterationRecord& rec) {
        if (std::abs(rec.minmax - trial.target) <= grid.epsilon) hit = rec.iter;
        return !hit;
      });
    } catch (const DivergenceError&) {
      hit.reset();
    }
    trial.config_i_o.push_back(hit);
    if (hit && (!trial.i_o || *hit < *trial.i_o)) {
      trial.i_o = hit;
      trial.best_config = config;
    }
  }
  return trial;
}

void measure_wall_clock(TrialRecord& trial, const ObjectiveSet& problem, const PreferenceVector& r,
                        const ModelVector& w0, int repetitions) {
  if (repetitions < 1) throw std::invalid_argument("measure_wall_clock: repetitions must be >= 1");
  if (!trial.i_o) {
    trial.t_o.reset();
    return;
  }
  SolverConfig config = trial.best_config;
  config.max_iter = *trial.i_o;
  std::vector<double> seconds;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    run(trial.algorithm, problem, r, w0, config, RecordSink{});
    const auto stop = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
    ++trial.timing_runs;
  }
  std::nth_element(seconds.begin(), seconds.begin() + seconds.size() / 2, seconds.end());
  trial.t_o = std::max(seconds[seconds.size() / 2], std::numeric_limits<double>::min());
}

TrialRecord tune_and_measure(Algorithm algorithm, const ObjectiveSet& problem,
                             const PreferenceVector& r, const ModelVector& w0, const GridSpec& grid,
                             std::uint64_t seed, std::optional<double> target) {
  TrialRecord trial = tune(algorithm, problem, r, w0, grid, seed, target);
  measure_wall_clock(trial, problem, r, w0);
  return trial;
}

TrimmedStats trimmed_mean_ci(std::span<const double> samples, double level) {
  if (samples.size() < 3) throw std::invalid_argument("trimmed_mean_ci: need at least 3 samples");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("trimmed_mean_ci: level must be in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::span<const double> kept(sorted.data() + 1, sorted.size() - 2);
  const double n = static_cast<double>(kept.size());
  const double mean = std::accumulate(kept.begin(), kept.end(), 0.0) / n;
  double spread = 0.0;
  if (kept.size() > 1) {
    double ss = 0.0;
    for (double x : kept) ss += (x - mean) * (x - mean);
    spread = std::sqrt(ss / (n - 1.0));
  }
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 0.5 + 0.5 * level);
  const double half = z * spread / std::sqrt(n);
  return TrimmedStats{mean, mean - half, mean + half};
}

std::uint64_t trial_seed(std::uint64_t master_seed, ProblemKind kind, Index K, int trial) {
  const std::uint64_t index = (static_cast<std::uint64_t>(kind) << 56) ^
                              (static_cast<std::uint64_t>(K) << 24) ^
                              static_cast<std::uint64_t>(trial);
  return derive_seed(master_seed, SeedDomain::Trial, index);
}

TrialInstance make_trial(ProblemKind kind, Index d, Index K, std::uint64_t seed) {
  return TrialInstance{make_problem(kind, d, K, seed), sample_preference(K, seed),
                       sample_initial(d, seed), seed};
}

namespace {

struct Job {
  ProblemKind kind;
  Index K;
  int trial;
  Algorithm algorithm;
};

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

TrimmedStats nan_stats() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return TrimmedStats{nan, nan, nan};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.n_trials < 3) throw std::invalid_argument("run_experiment: need at least 3 trials");
  if (spec.d < 1) throw std::invalid_argument("run_experiment: d must be >= 1");
  if (spec.kinds.empty() || spec.K_values.empty() || spec.algorithms.empty()) {
    throw std::invalid_argument("run_experiment: kinds, K values and algorithms must be non-empty");
  }
  spec.grid.validate();

  std::vector<Job> jobs;
  for (ProblemKind kind : spec.kinds) {
    for (Index K : spec.K_values) {
      for (int t = 0; t < spec.n_trials; ++t) {
        for (Algorithm algorithm : spec.algorithms) jobs.push_back(Job{kind, K, t, algorithm});
      }
    }
  }

  // J* depends only on the trial, so it is shared by every algorithm.
  std::map<std::tuple<ProblemKind, Index, int>, double> targets;
  std::vector<std::tuple<ProblemKind, Index, int>> trial_keys;
  for (ProblemKind kind : spec.kinds) {
    for (Index K : spec.K_values) {
      for (int t = 0; t < spec.n_trials; ++t) trial_keys.emplace_back(kind, K, t);
    }
  }
  std::vector<double> target_values(trial_keys.size());
  parallel_for(trial_keys.size(), spec.jobs, [&](std::size_t i) {
    const auto [kind, K, t] = trial_keys[i];
    const std::uint64_t seed = trial_seed(spec.master_seed, kind, K, t);
    const TrialInstance inst = make_trial(kind, spec.d, K, seed);
    target_values[i] = compute_target(inst.problem, inst.r, inst.w0, spec.grid,
                                      derive_seed(seed, SeedDomain::TieBreak));
  });
  for (std::size_t i = 0; i < trial_keys.size(); ++i) targets[trial_keys[i]] = target_values[i];

  std::vector<TrialRecord> trials(jobs.size());
  parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::uint64_t seed = trial_seed(spec.master_seed, job.kind, job.K, job.trial);
    const TrialInstance inst = make_trial(job.kind, spec.d, job.K, seed);
    trials[i] = tune(job.algorithm, inst.problem, inst.r, inst.w0, spec.grid, seed,
                     targets.at({job.kind, job.K, job.trial}));
    trials[i].kind = job.kind;
  });

  // Timing runs one at a time so workers do not contend.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    const TrialInstance inst = make_trial(job.kind, spec.d, job.K, trials[i].seed);
    measure_wall_clock(trials[i], inst.problem, inst.r, inst.w0);
  }

  ExperimentResult result;
  for (ProblemKind kind : spec.kinds) {
    for (Algorithm algorithm : spec.algorithms) {
      for (Index K : spec.K_values) {
        AggregateRecord agg;
        agg.kind = kind;
        agg.algorithm = algorithm;
        agg.K = K;
        agg.d = spec.d;
        std::vector<double> iterations;
        std::vector<double> seconds;
        for (const TrialRecord& trial : trials) {
          if (trial.kind != kind || trial.algorithm != algorithm || trial.K != K) continue;
          ++agg.n_trials;
          if (trial.censored()) {
            ++agg.n_censored;
            continue;
          }
          iterations.push_back(static_cast<double>(*trial.i_o));
          seconds.push_back(*trial.t_o);
        }
        agg.iterations = iterations.size() >= 3 ? trimmed_mean_ci(iterations) : nan_stats();
        agg.seconds = seconds.size() >= 3 ? trimmed_mean_ci(seconds) : nan_stats();
        result.aggregates.push_back(agg);
      }
    }
  }
  result.trials = std::move(trials);
  return result;
}

}  // namespace epoal
