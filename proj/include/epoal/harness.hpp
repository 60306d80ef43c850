/**
 * @file harness.hpp
 * @brief Benchmark protocol: grid tuning, target accuracy, iteration and
 * wall-clock complexity, and trimmed aggregation over trials.
 *
 * For one trial (problem, r, w0):
 *   1. J* is the smallest max_k r_k J_k(w_i) seen by the subgradient method
 *      over every step size in the mu grid and every iterate.
 *   2. For each grid configuration, i°(config) is the first iterate whose
 *      min-max value lies within epsilon of J*. Configs that never get there
 *      (or diverge) are censored.
 *   3. i° is the minimum over configs; t° is the wall-clock time of re-running
 *      the winning config for exactly i° iterations (median of 3).
 */

#pragma once

#include "epoal/problems.hpp"
#include "epoal/solvers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epoal {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n geometrically spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

struct GridSpec {
  std::vector<double> mu_grid;
  std::vector<double> eta_grid;
  std::vector<double> tau_grid;
  long max_iter = 1000;
  double epsilon = 0.01;

  /// mu in [1e-3, 1e-1], eta in [1e-1, 1e2], tau in [1e-2, 10], 10 points each.
  static GridSpec standard();

  void validate() const;
  /// Configurations searched for `algorithm`, in lexicographic (mu, then eta/tau) order.
  std::vector<SolverConfig> configs(Algorithm algorithm, std::uint64_t seed) const;
};

double compute_target(const ObjectiveSet& problem, const PreferenceVector& r, const ModelVector& w0,
                      const GridSpec& grid, std::uint64_t tie_seed);

std::optional<long> iteration_complexity(std::span<const double> minmax, double target, double epsilon);
std::optional<long> iteration_complexity(const std::vector<IterationRecord>& trace, double target,
                                         double epsilon);

struct TrialRecord {
  Algorithm algorithm = Algorithm::EpoAl;
  ProblemKind kind = ProblemKind::ConvexDistance;
  Index K = 0;
  Index d = 0;
  std::uint64_t seed = 0;
  SolverConfig best_config;
  std::optional<long> i_o;    ///< empty when censored
  std::optional<double> t_o;  ///< seconds; empty when censored
  double target = 0.0;
  /// i° per grid configuration, same order as GridSpec::configs.
  std::vector<std::optional<long>> config_i_o;
  int tuning_runs = 0;
  int timing_runs = 0;

  bool censored() const noexcept { return !i_o.has_value(); }
};

/// Grid search only: fills everything except t_o. Computes J* unless `target` is given.
TrialRecord tune(Algorithm algorithm, const ObjectiveSet& problem, const PreferenceVector& r,
                 const ModelVector& w0, const GridSpec& grid, std::uint64_t seed,
                 std::optional<double> target = std::nullopt);

/// Times best_config for exactly i° iterations; median of `repetitions`.
void measure_wall_clock(TrialRecord& trial, const ObjectiveSet& problem, const PreferenceVector& r,
                        const ModelVector& w0, int repetitions = 3);

TrialRecord tune_and_measure(Algorithm algorithm, const ObjectiveSet& problem,
                             const PreferenceVector& r, const ModelVector& w0, const GridSpec& grid,
                             std::uint64_t seed, std::optional<double> target = std::nullopt);

struct TrimmedStats {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kDefaultConfidence = 0.99;

/// Drops one minimum and one maximum, then mean +/- z(level) s / sqrt(n - 2).
TrimmedStats trimmed_mean_ci(std::span<const double> samples, double level = kDefaultConfidence);

/// A fresh (problem, r, w0) draw for one trial.
struct TrialInstance {
  SyntheticProblem problem;
  PreferenceVector r;
  ModelVector w0;
  std::uint64_t seed;
};

std::uint64_t trial_seed(std::uint64_t master_seed, ProblemKind kind, Index K, int trial);
TrialInstance make_trial(ProblemKind kind, Index d, Index K, std::uint64_t seed);

struct ExperimentSpec {
  std::vector<ProblemKind> kinds;
  std::vector<Index> K_values;
  Index d = 100;
  int n_trials = 30;
  std::uint64_t master_seed = 0;
  std::vector<Algorithm> algorithms{Algorithm::EpoAl, Algorithm::Subgradient, Algorithm::SmoothMax};
  GridSpec grid = GridSpec::standard();
  int jobs = 1;  ///< worker threads for tuning; timing always runs on one thread
};

struct AggregateRecord {
  ProblemKind kind = ProblemKind::ConvexDistance;
  Algorithm algorithm = Algorithm::EpoAl;
  Index K = 0;
  Index d = 0;
  int n_trials = 0;
  int n_censored = 0;
  /// NaN fields when fewer than three trials were uncensored.
  TrimmedStats iterations;
  TrimmedStats seconds;
};

struct ExperimentResult {
  std::vector<AggregateRecord> aggregates;  ///< ordered by kind, algorithm, K
  std::vector<TrialRecord> trials;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

}  // namespace epoal
