#include "epoal/solvers.hpp"

#include "epoal/diagnostics.hpp"
#include "epoal/problems.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>

namespace epoal {
namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// Wraps an objective set and counts evaluations.
class CountingObjectives final : public ObjectiveSet {
 public:
  explicit CountingObjectives(const ObjectiveSet& inner) : inner_(inner) {}
  Index count() const override { return inner_.count(); }
  Index dim() const override { return inner_.dim(); }
  Vector values(const ModelVector& w) const override {
    ++value_calls;
    return inner_.values(w);
  }
  Evaluation evaluate(const ModelVector& w) const override {
    ++evaluate_calls;
    return inner_.evaluate(w);
  }
  mutable std::atomic<int> value_calls{0};
  mutable std::atomic<int> evaluate_calls{0};

 private:
  const ObjectiveSet& inner_;
};

// Positive constant values with zero gradients.
class FlatObjectives final : public ObjectiveSet {
 public:
  Index count() const override { return 3; }
  Index dim() const override { return 4; }
  Vector values(const ModelVector&) const override { return vec({1.0, 2.0, 3.0}); }
  Evaluation evaluate(const ModelVector& w) const override { return {values(w), Matrix::Zero(4, 3)}; }
};

// Linear objectives whose value turns NaN once w[0] passes 1.
class RunawayObjectives final : public ObjectiveSet {
 public:
  Index count() const override { return 2; }
  Index dim() const override { return 1; }
  Vector values(const ModelVector& w) const override {
    const double x = w[0];
    if (x > 1.0) return Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
    return vec({2.0 - x, 3.0 - x});
  }
  Evaluation evaluate(const ModelVector& w) const override {
    return {values(w), Matrix::Constant(1, 2, -1.0)};
  }
};

double lse(const PreferenceVector& r, const Vector& jvals, double tau) {
  const Vector v = r.entries().cwiseProduct(jvals) / tau;
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

// Scalar LSE composite, so the finite-difference oracle can differentiate it.
class LseComposite final : public ObjectiveSet {
 public:
  LseComposite(const ObjectiveSet& inner, PreferenceVector r, double tau)
      : inner_(inner), r_(std::move(r)), tau_(tau) {}
  Index count() const override { return 1; }
  Index dim() const override { return inner_.dim(); }
  Vector values(const ModelVector& w) const override {
    return Vector::Constant(1, lse(r_, inner_.values(w), tau_));
  }
  Evaluation evaluate(const ModelVector&) const override {
    throw std::logic_error("finite differences only");
  }

 private:
  const ObjectiveSet& inner_;
  PreferenceVector r_;
  double tau_;
};

TEST(EpoAlStateTest, InitialDualIsUniform) {
  const EpoAlState s = EpoAlState::initial(ModelVector(Vector::Zero(3)), 4);
  EXPECT_EQ(s.iter, 0);
  for (Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(s.p[k], 0.25);
}

TEST(SolverConfigTest, Validation) {
  SolverConfig c;
  c.mu = 0.0;
  EXPECT_THROW(c.validate(Algorithm::Subgradient), std::invalid_argument);
  c.mu = 0.1;
  c.eta = -1.0;
  EXPECT_THROW(c.validate(Algorithm::EpoAl), std::invalid_argument);
  EXPECT_NO_THROW(c.validate(Algorithm::Subgradient));
  c.eta = 0.0;
  c.tau = 0.0;
  EXPECT_THROW(c.validate(Algorithm::SmoothMax), std::invalid_argument);
  EXPECT_NO_THROW(c.validate(Algorithm::EpoAl));
  c.tau = 1.0;
  c.max_iter = -1;
  EXPECT_THROW(c.validate(Algorithm::EpoAl), std::invalid_argument);
}

TEST(AlgorithmNames, RoundTrip) {
  for (auto a : {Algorithm::EpoAl, Algorithm::Subgradient, Algorithm::SmoothMax}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  EXPECT_FALSE(parse_algorithm("epo-search").has_value());
}

TEST(EpoAlStepTest, FairPointWithOneHotDualIsGradientStep) {
  const SyntheticProblem problem = fig1_problem(3);
  const PreferenceVector r(vec({0.5, 0.5}));
  const ModelVector w(vec({0.3, -0.1, -0.2}));  // orthogonal to the anchor axis, so J_1 = J_2
  const Evaluation eval = problem.evaluate(w);
  ASSERT_NEAR(fairness_residual(r, eval.values), 0.0, 1e-28);

  EpoAlState state{w, vec({1.0, 0.0}), 5};
  const EpoAlState next = epo_al_step(state, problem, r, 0.1, 10.0);
  const Vector expected = w.entries() - 0.1 * eval.jacobian.col(0);
  EXPECT_LE((next.w.entries() - expected).norm(), 1e-15);
  EXPECT_LE((next.p - state.p).norm(), 1e-15);
  EXPECT_EQ(next.iter, 6);
}

TEST(EpoAlStepTest, VanishingGradientsFixPrimal) {
  FlatObjectives flat;
  const PreferenceVector r(vec({1.0, 1.0, 1.0}));
  const EpoAlState state = EpoAlState::initial(ModelVector(vec({1.0, 2.0, 3.0, 4.0})), 3);
  const EpoAlState next = epo_al_step(state, flat, r, 0.5, 3.0);
  EXPECT_EQ(next.w.entries(), state.w.entries());
  // The dual still moves: L_r J != 0 for J = [1,2,3].
  EXPECT_GT((next.p - state.p).norm(), 0.0);
}

TEST(EpoAlStepTest, NegativeDualIsClippedOnlyInPrimal) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 4, 2, 3);
  const PreferenceVector r(vec({0.3, 0.7}));
  const ModelVector w(vec({0.1, 0.2, -0.3, 0.4}));
  const EpoAlState state{w, vec({-0.4, 1.2}), 0};
  const Evaluation eval = problem.evaluate(w);
  const EpoAlState next = epo_al_step(state, eval, r, 0.05, 2.0);
  const Vector constraint = lr_dense(r) * eval.values;
  const Vector weights = vec({0.0, 1.2}) + 2.0 * constraint;
  EXPECT_LE((next.w.entries() - (w.entries() - 0.05 * eval.jacobian * weights)).norm(), 1e-14);
  EXPECT_LE((next.p - (state.p + 0.05 * constraint)).norm(), 1e-14);
}

TEST(EpoAlStepTest, ConservesDualMassPerStep) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Index K = 2 + rep % 7;
    const SyntheticProblem problem = make_problem(ProblemKind::NonconvexGaussian, 5, K, 100 + rep);
    const PreferenceVector r = sample_preference(K, rep);
    EpoAlState state = EpoAlState::initial(sample_initial(5, rep), K);
    state.p += Vector::NullaryExpr(K, [&] { return unit(rng) - 0.5; });
    const double before = dual_mass(r, state.p);
    const EpoAlState next = epo_al_step(state, problem, r, 0.1, 5.0);
    EXPECT_NEAR(dual_mass(r, next.p), before, 1e-12 * std::abs(before));
  }
}

TEST(EpoAlStepTest, ConvergesToSegmentOracleOnTwoWellPair) {
  const SyntheticProblem problem = fig1_problem(3);
  const PreferenceVector r(vec({0.2, 0.8}));
  const SegmentEpoPoint oracle = two_objective_epo_oracle(r, problem);
  EpoAlState state = EpoAlState::initial(sample_initial(3, 0), 2);
  for (int i = 0; i < 1000; ++i) state = epo_al_step(state, problem, r, 0.1, 10.0);
  const Vector j = problem.values(state.w);
  EXPECT_LE((j - oracle.jvals).norm(), 1e-3);
  EXPECT_LE((state.w.entries() - oracle.w.entries()).norm(), 1e-2);
}

TEST(DualMassTest, Examples) {
  const PreferenceVector r(vec({0.2, 0.5, 0.3}));
  const Vector p0 = Vector::Constant(3, 1.0 / 3.0);
  EXPECT_NEAR(dual_mass(r, p0), (1.0 / 0.2 + 1.0 / 0.5 + 1.0 / 0.3) / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(dual_mass(PreferenceVector(vec({1.0, 1.0})), vec({0.5, 0.5})), 1.0);
  EXPECT_THROW(dual_mass(r, vec({1.0})), std::invalid_argument);
}

TEST(DualMassTest, ConservedAndLowerBoundedOverLongRuns) {
  for (auto kind : {ProblemKind::ConvexDistance, ProblemKind::NonconvexGaussian}) {
    const SyntheticProblem problem = make_problem(kind, 10, 5, 77);
    const PreferenceVector r = sample_preference(5, 77);
    SolverConfig config;
    config.mu = 0.05;
    config.eta = 20.0;
    config.max_iter = 1000;
    const auto trace = run(Algorithm::EpoAl, problem, r, sample_initial(10, 77), config);
    const double initial = dual_mass(r, *trace.front().p);
    for (const IterationRecord& rec : trace) {
      const double mass = dual_mass(r, *rec.p);
      ASSERT_LE(std::abs(mass - initial), 1e-9 * std::abs(initial)) << "iter " << rec.iter;
      const double top = rec.p->cwiseQuotient(r.entries()).maxCoeff();
      ASSERT_GE(top, mass / 5.0 - 1e-15);
      ASSERT_GT(rec.p->cwiseMax(0.0).maxCoeff(), 0.0);
    }
  }
}

TEST(EpoAlProperty, FixedPointIsFairAndStationary) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 6, 3, 12);
  const PreferenceVector r = sample_preference(3, 12);
  EpoAlState state = EpoAlState::initial(sample_initial(6, 12), 3);
  int quiet = 0;
  for (int i = 0; i < 200000 && quiet < 10; ++i) {
    const EpoAlState next = epo_al_step(state, problem, r, 0.1, 10.0);
    const bool still = (next.w.entries() - state.w.entries()).norm() <= 1e-12 &&
                       (next.p - state.p).norm() <= 1e-12;
    quiet = still ? quiet + 1 : 0;
    state = next;
  }
  ASSERT_EQ(quiet, 10) << "EPO-AL did not reach a numerical fixed point";
  const Evaluation eval = problem.evaluate(state.w);
  EXPECT_LE(fairness_residual(r, eval.values), 1e-8 * eval.values.squaredNorm());
  EXPECT_LE(pareto_stationarity_gap(eval.jacobian).gap, 1e-4);
}

TEST(SubgradientStepTest, UniqueMaximizer) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 3, 2, 5);
  const PreferenceVector r(vec({1.0, 1.0}));
  Evaluation eval = problem.evaluate(ModelVector(vec({0.1, 0.2, 0.3})));
  eval.values = vec({2.0, 1.0});
  Rng rng(0);
  const ModelVector w(vec({0.1, 0.2, 0.3}));
  const SubgradientStep step = subgradient_step(w, eval, r, 0.2, rng);
  EXPECT_EQ(step.active_index, 0);
  EXPECT_LE((step.w.entries() - (w.entries() - 0.2 * eval.jacobian.col(0))).norm(), 1e-15);
}

TEST(SubgradientStepTest, TiesAreBrokenUniformly) {
  const Index K = 4;
  Evaluation eval{Vector::Constant(K, 0.7), Matrix::Identity(K, K)};
  const PreferenceVector r(Vector::Ones(K));
  const ModelVector w(Vector::Zero(K));
  Rng rng(123);
  std::vector<int> counts(K, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[subgradient_step(w, eval, r, 0.1, rng).active_index];
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / K, 0.05);
}

TEST(SubgradientStepTest, NearTiesWithinToleranceAreActive) {
  const PreferenceVector r(vec({1.0, 1.0, 1.0}));
  EXPECT_EQ(active_set(r, vec({1.0, 1.0 - 1e-12, 0.5})).size(), 2u);
  EXPECT_EQ(active_set(r, vec({1.0, 1.0 - 1e-6, 0.5})).size(), 1u);
}

TEST(SubgradientStepTest, SingletonStepIsParallelToActiveGradient) {
  const SyntheticProblem problem = make_problem(ProblemKind::NonconvexGaussian, 7, 5, 21);
  const PreferenceVector r = sample_preference(5, 21);
  Rng rng(0);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelVector w = sample_initial(7, 1000 + rep);
    const Evaluation eval = problem.evaluate(w);
    const SubgradientStep step = subgradient_step(w, eval, r, 0.3, rng);
    const Vector delta = step.w.entries() - w.entries();
    const Vector g = eval.jacobian.col(step.active_index);
    EXPECT_NEAR(std::abs(delta.dot(g)), delta.norm() * g.norm(), 1e-12 * delta.norm() * g.norm());
    EXPECT_LT(delta.dot(g), 0.0);
  }
}

TEST(SubgradientRunTest, ImprovesMinmaxOnConvexFamily) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 20, 4, 8);
  const PreferenceVector r = sample_preference(4, 8);
  SolverConfig config;
  config.mu = 0.1;
  config.max_iter = 500;
  const auto trace = run(Algorithm::Subgradient, problem, r, sample_initial(20, 8), config);
  double best = trace.front().minmax;
  for (const auto& rec : trace) best = std::min(best, rec.minmax);
  EXPECT_LT(best, trace.front().minmax);
  EXPECT_LT(trace.back().minmax, trace.front().minmax);
}

TEST(SmoothMaxStepTest, SingleObjectiveReducesToScaledGradient) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 4, 1, 2);
  const PreferenceVector r(vec({0.7}));
  const ModelVector w(vec({0.2, 0.1, 0.0, -0.4}));
  const Evaluation eval = problem.evaluate(w);
  const ModelVector next = smoothmax_step(w, eval, r, 0.05, 0.5);
  const Vector expected = w.entries() - (0.05 / 0.5) * 0.7 * eval.jacobian.col(0);
  EXPECT_LE((next.entries() - expected).norm(), 1e-15);
}

TEST(SmoothMaxStepTest, SmallTemperatureApproachesSubgradientDirection) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 5, 3, 4);
  const PreferenceVector r = sample_preference(3, 4);
  const ModelVector w = sample_initial(5, 4);
  const Evaluation eval = problem.evaluate(w);
  const auto active = active_set(r, eval.values);
  ASSERT_EQ(active.size(), 1u);
  const double tau = 1e-4;
  const Vector direction = smoothmax_direction(eval, r, tau) * tau;
  const Vector sub = r[active[0]] * eval.jacobian.col(active[0]);
  EXPECT_LE((direction - sub).norm(), 1e-6 * sub.norm());
}

TEST(SmoothMaxStepTest, MatchesFiniteDifferenceOfComposite) {
  for (auto kind : {ProblemKind::ConvexDistance, ProblemKind::NonconvexGaussian}) {
    const SyntheticProblem problem = make_problem(kind, 6, 4, 10);
    const PreferenceVector r = sample_preference(4, 10);
    for (double tau : {0.05, 0.5, 5.0}) {
      const LseComposite composite(problem, r, tau);
      for (int rep = 0; rep < 10; ++rep) {
        const ModelVector w = sample_initial(6, 50 + rep);
        const Vector analytic = smoothmax_direction(problem.evaluate(w), r, tau);
        const Vector numeric = finite_diff_jacobian(composite, w, 1e-5).col(0);
        EXPECT_LE((analytic - numeric).norm(), 1e-5 * analytic.norm())
            << to_string(kind) << " tau=" << tau;
      }
    }
  }
}

TEST(SmoothMaxStepTest, LargeValuesDoNotOverflow) {
  Evaluation eval{vec({1e6, 1e6 + 1.0}), Matrix::Identity(2, 2)};
  const Vector direction = smoothmax_direction(eval, PreferenceVector(vec({1.0, 1.0})), 1e-3);
  EXPECT_TRUE(direction.allFinite());
}

TEST(RunTest, ZeroIterationsGivesSingleRecord) {
  const SyntheticProblem problem = fig1_problem(3);
  const PreferenceVector r(vec({0.2, 0.8}));
  SolverConfig config;
  config.max_iter = 0;
  config.eta = 10.0;
  for (auto a : {Algorithm::EpoAl, Algorithm::Subgradient, Algorithm::SmoothMax}) {
    const auto trace = run(a, problem, r, sample_initial(3, 1), config);
    ASSERT_EQ(trace.size(), 1u);
    EXPECT_EQ(trace[0].iter, 0);
    EXPECT_EQ(trace[0].minmax, minmax_value(r, trace[0].jvals));
    EXPECT_EQ(trace[0].p.has_value(), a == Algorithm::EpoAl);
  }
}

TEST(RunTest, OneEvaluationPerIterate) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 8, 3, 6);
  const PreferenceVector r = sample_preference(3, 6);
  SolverConfig config;
  config.max_iter = 37;
  config.eta = 1.0;
  for (auto a : {Algorithm::EpoAl, Algorithm::Subgradient, Algorithm::SmoothMax}) {
    CountingObjectives counting(problem);
    const auto trace = run(a, counting, r, sample_initial(8, 6), config);
    EXPECT_EQ(trace.size(), 38u);
    EXPECT_EQ(counting.evaluate_calls.load(), 38) << to_string(a);
    EXPECT_EQ(counting.value_calls.load(), 0);
  }
}

TEST(RunTest, RecordsAreConsistent) {
  const SyntheticProblem problem = make_problem(ProblemKind::NonconvexGaussian, 5, 3, 2);
  const PreferenceVector r = sample_preference(3, 2);
  SolverConfig config;
  config.max_iter = 20;
  const auto trace = run(Algorithm::Subgradient, problem, r, sample_initial(5, 2), config);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].iter, static_cast<long>(i));
    EXPECT_EQ(trace[i].minmax, minmax_value(r, trace[i].jvals));
    EXPECT_EQ(trace[i].fairness, fairness_residual(r, trace[i].jvals));
    EXPECT_EQ(trace[i].active_index.has_value(), i + 1 < trace.size());
  }
}

TEST(RunTest, DeterministicGivenSeed) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 10, 4, 3);
  const PreferenceVector r = sample_preference(4, 3);
  SolverConfig config;
  config.max_iter = 300;
  config.eta = 3.0;
  config.tau = 0.1;
  config.seed = 99;
  for (auto a : {Algorithm::EpoAl, Algorithm::Subgradient, Algorithm::SmoothMax}) {
    const auto first = run(a, problem, r, sample_initial(10, 3), config);
    const auto second = run(a, problem, r, sample_initial(10, 3), config);
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      ASSERT_EQ(first[i].jvals, second[i].jvals);
      ASSERT_EQ(first[i].active_index, second[i].active_index);
    }
  }
}

TEST(RunTest, EpoAlFairnessDecreasesOnConvexFamily) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 20, 4, 31);
  const PreferenceVector r = sample_preference(4, 31);
  SolverConfig config;
  config.mu = 0.1;
  config.eta = 10.0;
  config.max_iter = 1000;
  const auto trace = run(Algorithm::EpoAl, problem, r, sample_initial(20, 31), config);
  const std::size_t tenth = trace.size() / 10;
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < tenth; ++i) {
    head += trace[i].fairness;
    tail += trace[trace.size() - 1 - i].fairness;
  }
  EXPECT_LT(tail, head);
}

TEST(RunTest, EarlyStopWhenRequested) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 6, 3, 12);
  const PreferenceVector r = sample_preference(3, 12);
  SolverConfig config;
  config.mu = 0.1;
  config.eta = 10.0;
  config.max_iter = 100000;
  config.stop_tolerance = 1e-6;
  const auto trace = run(Algorithm::EpoAl, problem, r, sample_initial(6, 12), config);
  EXPECT_LT(trace.size(), 100001u);
  EXPECT_LE(trace.back().fairness, 1e-6);
}

TEST(RunTest, DivergenceCarriesIterationAndPartialTrace) {
  RunawayObjectives runaway;
  const PreferenceVector r(vec({1.0, 1.0}));
  SolverConfig config;
  config.mu = 0.3;
  config.max_iter = 100;
  std::vector<IterationRecord> seen;
  try {
    run(Algorithm::Subgradient, runaway, r, ModelVector(vec({0.0})), config,
        [&seen](const IterationRecord& rec) { seen.push_back(rec); });
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    // w_i = 0.3 i, so w_4 = 1.2 is the first NaN iterate.
    EXPECT_EQ(e.iteration(), 4);
    EXPECT_EQ(seen.size(), 4u);
    ASSERT_EQ(e.iterate().size(), 1);
    EXPECT_NEAR(e.iterate()[0], 1.2, 1e-12);
  }
}

TEST(RunTest, RejectsMismatchedInputs) {
  const SyntheticProblem problem = make_problem(ProblemKind::ConvexDistance, 4, 3, 1);
  SolverConfig config;
  EXPECT_THROW(run(Algorithm::EpoAl, problem, PreferenceVector(vec({1.0, 1.0})),
                   sample_initial(4, 1), config),
               std::invalid_argument);
  EXPECT_THROW(run(Algorithm::EpoAl, problem, sample_preference(3, 1), sample_initial(5, 1), config),
               std::invalid_argument);
}

}  // namespace
}  // namespace epoal
