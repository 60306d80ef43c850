#include "epoal/diagnostics.hpp"

#include "epoal/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace epoal {

StationarityResult pareto_stationarity_gap(const Matrix& G, double tol, int max_fw_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("pareto_stationarity_gap: tol must be > 0");
  if (max_fw_iter < 1) throw std::invalid_argument("pareto_stationarity_gap: max_fw_iter must be >= 1");
  if (G.cols() < 1) throw std::invalid_argument("pareto_stationarity_gap: need at least one gradient");
  if (!G.allFinite()) throw std::invalid_argument("pareto_stationarity_gap: non-finite gradient matrix");

  const Index K = G.cols();
  Vector p = Vector::Constant(K, 1.0 / static_cast<double>(K));
  Vector combo = G * p;

  // Away steps let the iterate leave vertices it does not need, which plain
  // Frank-Wolfe can only do asymptotically when the minimizer lies on a face.
  int iterations = 0;
  while (iterations < max_fw_iter) {
    const Vector q = G.transpose() * combo;
    const double current = combo.squaredNorm();
    Index toward = 0;
    q.minCoeff(&toward);  // first minimum on ties
    Index away = -1;
    for (Index k = 0; k < K; ++k) {
      if (p[k] > 0.0 && (away < 0 || q[k] > q[away])) away = k;
    }
    const double fw_gap = current - q[toward];
    if (fw_gap <= tol) break;
    const double away_gap = q[away] - current;
    ++iterations;

    // Exact line search along the chosen direction, capped at the feasible step.
    if (fw_gap >= away_gap) {
      const Vector dir = G.col(toward) - combo;
      const double curvature = dir.squaredNorm();
      if (curvature <= 0.0) break;
      const double step = std::clamp(fw_gap / curvature, 0.0, 1.0);
      p *= 1.0 - step;
      p[toward] += step;
    } else {
      const Vector dir = combo - G.col(away);
      const double curvature = dir.squaredNorm();
      if (curvature <= 0.0) break;
      const double max_step = p[away] / (1.0 - p[away]);
      const double step = std::clamp(away_gap / curvature, 0.0, max_step);
      p *= 1.0 + step;
      p[away] = step == max_step ? 0.0 : p[away] - step;
    }
    combo = G * p;
  }

  p = p.cwiseMax(0.0);
  p /= p.sum();
  combo = G * p;
  return StationarityResult{combo.norm(), std::move(p), iterations};
}

CertificateTolerances default_tolerances(const PreferenceVector& r, const Evaluation& eval) {
  const double top = minmax_value(r, eval.values);
  const double grad_scale = eval.jacobian.colwise().norm().maxCoeff();
  return CertificateTolerances{1e-8 * top * top, 1e-4 * grad_scale};
}

EpoCertificate certify_epo(const Evaluation& eval, const PreferenceVector& r, double fair_tol,
                           double gap_tol) {
  if (!(fair_tol >= 0.0) || !(gap_tol >= 0.0)) {
    throw std::invalid_argument("certify_epo: tolerances must be non-negative");
  }
  EpoCertificate cert;
  cert.fairness = fairness_residual(r, eval.values);
  cert.stationarity_gap = pareto_stationarity_gap(eval.jacobian).gap;
  cert.minmax = minmax_value(r, eval.values);
  cert.fair_tol = fair_tol;
  cert.gap_tol = gap_tol;
  cert.is_fair = cert.fairness <= fair_tol;
  cert.is_stationary = cert.stationarity_gap <= gap_tol;
  return cert;
}

EpoCertificate certify_epo(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r,
                           double fair_tol, double gap_tol) {
  return certify_epo(obj.evaluate(w), r, fair_tol, gap_tol);
}

EpoCertificate certify_epo(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r) {
  const Evaluation eval = obj.evaluate(w);
  const CertificateTolerances tols = default_tolerances(r, eval);
  return certify_epo(eval, r, tols.fair_tol, tols.gap_tol);
}

SegmentEpoPoint two_objective_epo_oracle(const PreferenceVector& r, const SyntheticProblem& problem,
                                         double tol) {
  if (r.size() != 2 || problem.count() != 2) {
    throw std::invalid_argument("two_objective_epo_oracle: requires exactly two objectives");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("two_objective_epo_oracle: tol must be > 0");
  const Vector first = problem.anchors().row(0).transpose();
  const Vector second = problem.anchors().row(1).transpose();
  if ((first + second).norm() > 1e-12 || std::abs(first.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("two_objective_epo_oracle: anchors must be -a and +a with ||a|| = 1");
  }
  const Vector axis = 0.5 * (second - first);

  auto residual_at = [&](double t, Vector* jvals) {
    const Vector values = problem.values(ModelVector(t * axis));
    if (jvals) *jvals = values;
    return r[0] * values[0] - r[1] * values[1];
  };

  double lo = -1.0;
  double hi = 1.0;
  const double f_lo = residual_at(lo, nullptr);
  const double f_hi = residual_at(hi, nullptr);
  if (f_lo == 0.0 || f_hi == 0.0) {
    const double t = f_lo == 0.0 ? lo : hi;
    Vector jvals;
    residual_at(t, &jvals);
    return SegmentEpoPoint{t, jvals, ModelVector(t * axis)};
  }
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    throw InfeasibleError("two_objective_epo_oracle: weighted objectives do not cross on the segment");
  }

  const bool lo_positive = f_lo > 0.0;
  double t = 0.0;
  Vector jvals;
  for (int iter = 0; iter < 200; ++iter) {
    t = 0.5 * (lo + hi);
    const double f = residual_at(t, &jvals);
    if (std::abs(f) <= tol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon()) break;
    if ((f > 0.0) == lo_positive) {
      lo = t;
    } else {
      hi = t;
    }
  }
  return SegmentEpoPoint{t, jvals, ModelVector(t * axis)};
}

}  // namespace epoal
