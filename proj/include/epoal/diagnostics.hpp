/**
 * @file diagnostics.hpp
 * @brief Certificates for Pareto stationarity and fairness.
 */

#pragma once

#include "epoal/core.hpp"

namespace epoal {

struct StationarityResult {
  double gap = 0.0;  ///< min over the simplex of ||G p||, up to solver tolerance
  Vector weights;    ///< simplex point attaining gap
  int fw_iterations = 0;
};

inline constexpr double kDefaultFwTolerance = 1e-10;
inline constexpr int kDefaultFwMaxIter = 500;

/**
 * Min-norm point of the convex hull of the columns of G.
 *
 * Away-step Frank-Wolfe on 1/2 ||G p||^2 over the simplex, starting from the
 * barycentre, with exact line search and lowest-index vertex selection. Stops
 * once the Frank-Wolfe duality gap <p - e_k, G^T G p> drops to tol, or after
 * max_fw_iter steps. Each step costs O(Kd).
 */
StationarityResult pareto_stationarity_gap(const Matrix& G, double tol = kDefaultFwTolerance,
                                           int max_fw_iter = kDefaultFwMaxIter);

struct EpoCertificate {
  double fairness = 0.0;
  double stationarity_gap = 0.0;
  bool is_fair = false;
  bool is_stationary = false;
  double minmax = 0.0;
  double fair_tol = 0.0;
  double gap_tol = 0.0;
};

struct CertificateTolerances {
  double fair_tol;
  double gap_tol;
};

/// fair_tol = 1e-8 (max_k r_k J_k)^2, gap_tol = 1e-4 max_k ||grad J_k||.
CertificateTolerances default_tolerances(const PreferenceVector& r, const Evaluation& eval);

EpoCertificate certify_epo(const Evaluation& eval, const PreferenceVector& r, double fair_tol,
                           double gap_tol);
EpoCertificate certify_epo(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r,
                           double fair_tol, double gap_tol);
EpoCertificate certify_epo(const ModelVector& w, const ObjectiveSet& obj, const PreferenceVector& r);

class SyntheticProblem;

/// Thrown when the weighted objectives do not cross on the anchor segment.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SegmentEpoPoint {
  double t = 0.0;  ///< w = t * a, a = (anchor_2 - anchor_1) / 2
  Vector jvals;
  ModelVector w;
};

/**
 * EPO point of a symmetric two-anchor problem (anchors -a and +a, ||a|| = 1).
 *
 * Restricts w to the anchor segment, where the Pareto set of the two isotropic
 * objectives lives, and bisects r_1 J_1 - r_2 J_2 on t in [-1, 1]. t = -1 is
 * the first anchor and t = +1 the second.
 */
SegmentEpoPoint two_objective_epo_oracle(const PreferenceVector& r, const SyntheticProblem& problem,
                                         double tol = 1e-12);

}  // namespace epoal
