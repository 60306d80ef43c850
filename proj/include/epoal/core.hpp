/**
 * @file core.hpp
 * @brief Model/preference vectors, the objective-set interface, the
 * matrix-free fairness operator L_r and the scalar diagnostics built on it.
 *
 * L_r = diag(r) (I - 11^T / K) diag(r) is never materialized inside solver
 * loops. Applying it costs O(K):
 *
 *     L_r v = r .* ((r .* v) - mean(r .* v))
 *
 * and its quadratic form is the (unnormalized) variance of the weighted
 * objectives, which vanishes exactly on the fairness set r_1 J_1 = ... = r_K J_K.
 */

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace epoal {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when an iterate, objective value or gradient becomes non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, Vector iterate, long iteration = -1);

  /// Iteration index of the offending iterate, or -1 if not yet attached.
  long iteration() const noexcept { return iteration_; }
  const Vector& iterate() const noexcept { return iterate_; }

  DivergenceError at_iteration(long iteration) const;

 private:
  std::string detail_;
  Vector iterate_;
  long iteration_;
};

/// The primal variable w. Non-empty with finite entries.
class ModelVector {
 public:
  explicit ModelVector(Vector entries);

  const Vector& entries() const noexcept { return entries_; }
  Index dim() const noexcept { return entries_.size(); }
  double operator[](Index i) const { return entries_[i]; }

 private:
  Vector entries_;
};

/// Strictly positive, finite preference weights r.
class PreferenceVector {
 public:
  explicit PreferenceVector(Vector entries);

  const Vector& entries() const noexcept { return entries_; }
  Index size() const noexcept { return entries_.size(); }
  double operator[](Index k) const { return entries_[k]; }

  /// Element-wise reciprocal r^{-1}; spans the nullspace of L_r.
  Vector inverse() const { return entries_.cwiseInverse(); }

 private:
  Vector entries_;
};

/// Objective values together with the d x K gradient matrix G(w).
struct Evaluation {
  Vector values;    ///< J(w), length K
  Matrix jacobian;  ///< column k is grad J_k(w)
};

/**
 * K differentiable objectives over R^d.
 *
 * Implementations must be pure functions of w and safe to call concurrently.
 */
class ObjectiveSet {
 public:
  virtual ~ObjectiveSet() = default;

  virtual Index count() const = 0;
  virtual Index dim() const = 0;

  virtual Vector values(const ModelVector& w) const = 0;

  /// Values and jacobian from one shared pass.
  virtual Evaluation evaluate(const ModelVector& w) const = 0;

  Matrix jacobian(const ModelVector& w) const { return evaluate(w).jacobian; }
};

/// Matrix-free L_r. Holds only r.
class LrOperator {
 public:
  explicit LrOperator(PreferenceVector r) : r_(std::move(r)) {}

  const PreferenceVector& preference() const noexcept { return r_; }

  /// L_r v in O(K). Throws std::invalid_argument on a size mismatch.
  Vector apply(const Vector& v) const;

  /// v^T L_r v, computed as the centred sum of squares of r .* v (never negative).
  double quadratic_form(const Vector& v) const;

 private:
  PreferenceVector r_;
};

Vector lr_apply(const PreferenceVector& r, const Vector& v);

/// Dense L_r. Test oracle only.
Matrix lr_dense(const PreferenceVector& r);

/// J^T L_r J; zero iff all r_k J_k coincide.
double fairness_residual(const PreferenceVector& r, const Vector& jvals);

/// max_k r_k J_k.
double minmax_value(const PreferenceVector& r, const Vector& jvals);

/// Central-difference approximation of G(w) with step h > 0.
Matrix finite_diff_jacobian(const ObjectiveSet& obj, const ModelVector& w, double h);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace epoal
