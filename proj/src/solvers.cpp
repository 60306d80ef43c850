#include "epoal/solvers.hpp"

#include "epoal/diagnostics.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace epoal {

namespace {

void check_evaluation(const Evaluation& eval, const ModelVector& w) {
  if (!eval.values.allFinite() || !eval.jacobian.allFinite()) {
    throw DivergenceError("non-finite objective value or gradient", w.entries());
  }
}

ModelVector checked_iterate(Vector next) {
  if (!next.allFinite()) throw DivergenceError("iterate became non-finite", next);
  return ModelVector(std::move(next));
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::EpoAl:
      return "epo-al";
    case Algorithm::Subgradient:
      return "subgradient";
    case Algorithm::SmoothMax:
      return "smooth-max";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "epo-al") return Algorithm::EpoAl;
  if (name == "subgradient") return Algorithm::Subgradient;
  if (name == "smooth-max") return Algorithm::SmoothMax;
  return std::nullopt;
}

EpoAlState EpoAlState::initial(ModelVector w0, Index K) {
  if (K < 1) throw std::invalid_argument("EpoAlState: K must be >= 1");
  return EpoAlState{std::move(w0), Vector::Constant(K, 1.0 / static_cast<double>(K)), 0};
}

void SolverConfig::validate(Algorithm algorithm) const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("step size mu must be > 0");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
  if (algorithm == Algorithm::EpoAl && (!(eta >= 0.0) || !std::isfinite(eta))) {
    throw std::invalid_argument("penalty eta must be >= 0");
  }
  if (algorithm == Algorithm::SmoothMax && (!(tau > 0.0) || !std::isfinite(tau))) {
    throw std::invalid_argument("temperature tau must be > 0");
  }
  if (stop_tolerance && !(*stop_tolerance >= 0.0)) {
    throw std::invalid_argument("stop tolerance must be >= 0");
  }
}

EpoAlState epo_al_step(const EpoAlState& state, const Evaluation& eval, const PreferenceVector& r,
                       double mu, double eta) {
  check_evaluation(eval, state.w);
  const Vector constraint = lr_apply(r, eval.values);
  const Vector weights = state.p.cwiseMax(0.0) + eta * constraint;
  Vector w_next = state.w.entries() - mu * (eval.jacobian * weights);
  Vector p_next = state.p + mu * constraint;
  if (!p_next.allFinite()) throw DivergenceError("dual variable became non-finite", state.w.entries());
  return EpoAlState{checked_iterate(std::move(w_next)), std::move(p_next), state.iter + 1};
}

EpoAlState epo_al_step(const EpoAlState& state, const ObjectiveSet& obj, const PreferenceVector& r,
                       double mu, double eta) {
  return epo_al_step(state, obj.evaluate(state.w), r, mu, eta);
}

std::vector<Index> active_set(const PreferenceVector& r, const Vector& jvals) {
  const Vector weighted = r.entries().cwiseProduct(jvals);
  const double top = weighted.maxCoeff();
  const double threshold = top - kActiveSetTolerance * std::abs(top);
  std::vector<Index> active;
  for (Index k = 0; k < weighted.size(); ++k) {
    if (weighted[k] >= threshold) active.push_back(k);
  }
  return active;
}

SubgradientStep subgradient_step(const ModelVector& w, const Evaluation& eval,
                                 const PreferenceVector& r, double mu, Rng& rng) {
  check_evaluation(eval, w);
  const std::vector<Index> active = active_set(r, eval.values);
  Index chosen = active.front();
  if (active.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
    chosen = active[pick(rng)];
  }
  Vector next = w.entries() - mu * r[chosen] * eval.jacobian.col(chosen);
  return SubgradientStep{checked_iterate(std::move(next)), chosen};
}

SubgradientStep subgradient_step(const ModelVector& w, const ObjectiveSet& obj,
                                 const PreferenceVector& r, double mu, Rng& rng) {
  return subgradient_step(w, obj.evaluate(w), r, mu, rng);
}

Vector smoothmax_direction(const Evaluation& eval, const PreferenceVector& r, double tau) {
  Vector scaled = r.entries().cwiseProduct(eval.values) / tau;
  scaled.array() -= scaled.maxCoeff();
  Vector softmax = scaled.array().exp();
  const double total = softmax.sum();
  if (!std::isfinite(total) || total <= 0.0) {
    throw DivergenceError("smooth-max weights overflowed", Vector());
  }
  softmax /= total;
  return eval.jacobian * (softmax.cwiseProduct(r.entries()) / tau);
}

ModelVector smoothmax_step(const ModelVector& w, const Evaluation& eval, const PreferenceVector& r,
                           double mu, double tau) {
  check_evaluation(eval, w);
  Vector direction;
  try {
    direction = smoothmax_direction(eval, r, tau);
  } catch (const DivergenceError&) {
    throw DivergenceError("smooth-max weights overflowed", w.entries());
  }
  return checked_iterate(w.entries() - mu * direction);
}

ModelVector smoothmax_step(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r,
                           double mu, double tau) {
  return smoothmax_step(w, obj.evaluate(w), r, mu, tau);
}

double dual_mass(const PreferenceVector& r, const Vector& p) {
  if (p.size() != r.size()) throw std::invalid_argument("dual_mass: dimension mismatch");
  return p.cwiseQuotient(r.entries()).sum();
}

RunOutcome run_while(Algorithm algorithm, const ObjectiveSet& obj, const PreferenceVector& r,
                     const ModelVector& w0, const SolverConfig& config,
                     const RecordVisitor& keep_going) {
  config.validate(algorithm);
  if (obj.count() != r.size()) throw std::invalid_argument("run: preference length differs from K");
  if (obj.dim() != w0.dim()) throw std::invalid_argument("run: initial point has wrong dimension");

  EpoAlState state = EpoAlState::initial(w0, r.size());
  Rng rng(config.seed);

  for (long i = 0;; ++i) {
    Evaluation eval = obj.evaluate(state.w);
    try {
      check_evaluation(eval, state.w);
    } catch (const DivergenceError& e) {
      throw e.at_iteration(i);
    }

    IterationRecord record;
    record.iter = i;
    record.jvals = eval.values;
    record.minmax = minmax_value(r, eval.values);
    record.fairness = fairness_residual(r, eval.values);
    if (algorithm == Algorithm::EpoAl) record.p = state.p;

    bool stop = i >= config.max_iter;
    if (!stop && config.stop_tolerance) {
      const double gap = pareto_stationarity_gap(eval.jacobian).gap;
      stop = record.fairness + gap <= *config.stop_tolerance;
    }
    if (stop) {
      keep_going(record);
      break;
    }

    try {
      switch (algorithm) {
        case Algorithm::EpoAl:
          state = epo_al_step(state, eval, r, config.mu, config.eta);
          break;
        case Algorithm::Subgradient: {
          SubgradientStep step = subgradient_step(state.w, eval, r, config.mu, rng);
          record.active_index = step.active_index;
          state.w = std::move(step.w);
          state.iter += 1;
          break;
        }
        case Algorithm::SmoothMax:
          state.w = smoothmax_step(state.w, eval, r, config.mu, config.tau);
          state.iter += 1;
          break;
      }
    } catch (const DivergenceError& e) {
      // The iterate itself was finite; keep it in the trace before failing.
      keep_going(record);
      throw e.at_iteration(i);
    }
    if (!keep_going(record)) break;
  }

  RunOutcome outcome{state.w, std::nullopt, state.iter};
  if (algorithm == Algorithm::EpoAl) outcome.p = state.p;
  return outcome;
}

RunOutcome run(Algorithm algorithm, const ObjectiveSet& obj, const PreferenceVector& r,
               const ModelVector& w0, const SolverConfig& config, const RecordSink& sink) {
  return run_while(algorithm, obj, r, w0, config, [&sink](const IterationRecord& record) {
    if (sink) sink(record);
    return true;
  });
}

std::vector<IterationRecord> run(Algorithm algorithm, const ObjectiveSet& obj,
                                 const PreferenceVector& r, const ModelVector& w0,
                                 const SolverConfig& config) {
  std::vector<IterationRecord> trace;
  trace.reserve(static_cast<std::size_t>(config.max_iter) + 1);
  run(algorithm, obj, r, w0, config, [&trace](const IterationRecord& rec) { trace.push_back(rec); });
  return trace;
}

}  // namespace epoal
