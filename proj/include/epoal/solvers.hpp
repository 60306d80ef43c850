/**
 * @file solvers.hpp
 * @brief EPO-AL, subgradient and smooth-max steppers plus the shared run loop.
 */

#pragma once

#include "epoal/core.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace epoal {

using Rng = std::mt19937_64;

enum class Algorithm { EpoAl, Subgradient, SmoothMax };

std::string_view to_string(Algorithm algorithm);
std::optional<Algorithm> parse_algorithm(std::string_view name);

/**
 * Primal-dual iterate of EPO-AL.
 *
 * p starts at 1/K and is never clipped in storage; sum_k p_k / r_k is
 * conserved by the dual recursion.
 */
struct EpoAlState {
  ModelVector w;
  Vector p;
  long iter = 0;

  static EpoAlState initial(ModelVector w0, Index K);
};

struct SolverConfig {
  double mu = 0.1;   ///< step size
  double eta = 0.0;  ///< penalty, EPO-AL only
  double tau = 1.0;  ///< temperature, smooth-max only
  long max_iter = 1000;
  std::uint64_t seed = 0;
  /// When set, stop once fairness residual + stationarity gap <= this value.
  std::optional<double> stop_tolerance;

  /// Throws std::invalid_argument if a parameter used by `algorithm` is out of range.
  void validate(Algorithm algorithm) const;
};

struct IterationRecord {
  long iter = 0;
  Vector jvals;
  double minmax = 0.0;
  double fairness = 0.0;
  std::optional<Vector> p;            ///< EPO-AL only
  std::optional<Index> active_index;  ///< subgradient only: index used to leave this iterate
};

// EPO-AL, one step:
//   w+ = w - mu G(w) ([p]_+ + eta L_r J(w))
//   p+ = p + mu L_r J(w)
EpoAlState epo_al_step(const EpoAlState& state, const Evaluation& eval, const PreferenceVector& r,
                       double mu, double eta);
EpoAlState epo_al_step(const EpoAlState& state, const ObjectiveSet& obj, const PreferenceVector& r,
                       double mu, double eta);

struct SubgradientStep {
  ModelVector w;
  Index active_index;
};

/// Relative tolerance deciding which r_k J_k tie with the maximum.
inline constexpr double kActiveSetTolerance = 1e-9;

std::vector<Index> active_set(const PreferenceVector& r, const Vector& jvals);

SubgradientStep subgradient_step(const ModelVector& w, const Evaluation& eval,
                                 const PreferenceVector& r, double mu, Rng& rng);
SubgradientStep subgradient_step(const ModelVector& w, const ObjectiveSet& obj,
                                 const PreferenceVector& r, double mu, Rng& rng);

/// Gradient step on log sum_k exp(r_k J_k / tau); note there is no leading tau.
ModelVector smoothmax_step(const ModelVector& w, const Evaluation& eval, const PreferenceVector& r,
                           double mu, double tau);
ModelVector smoothmax_step(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r,
                           double mu, double tau);

/// Softmax-weighted descent direction of the smooth-max composite at eval.
Vector smoothmax_direction(const Evaluation& eval, const PreferenceVector& r, double tau);

using RecordSink = std::function<void(const IterationRecord&)>;

struct RunOutcome {
  ModelVector w;
  std::optional<Vector> p;
  long iterations = 0;  ///< steps actually taken
};

/**
 * Runs `config.max_iter` steps and reports iterates 0..max_iter to `sink`.
 *
 * One objective evaluation per iterate is shared between the record and the
 * step. Non-finite values raise DivergenceError tagged with the iteration.
 */
RunOutcome run(Algorithm algorithm, const ObjectiveSet& obj, const PreferenceVector& r,
               const ModelVector& w0, const SolverConfig& config, const RecordSink& sink);

/// Like run, but stops after the first record for which `keep_going` returns false.
using RecordVisitor = std::function<bool(const IterationRecord&)>;
RunOutcome run_while(Algorithm algorithm, const ObjectiveSet& obj, const PreferenceVector& r,
                     const ModelVector& w0, const SolverConfig& config,
                     const RecordVisitor& keep_going);

std::vector<IterationRecord> run(Algorithm algorithm, const ObjectiveSet& obj,
                                 const PreferenceVector& r, const ModelVector& w0,
                                 const SolverConfig& config);

/// sum_k p_k / r_k.
double dual_mass(const PreferenceVector& r, const Vector& p);

}  // namespace epoal
