#include "epoal/core.hpp"

#include <cmath>
#include <utility>

namespace epoal {

namespace {

std::string with_iteration(const std::string& what, long iteration) {
  if (iteration < 0) return what;
  return what + " (iteration " + std::to_string(iteration) + ")";
}

void require_same_size(Index expected, Index got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(std::string(what) + ": expected length " +
                                std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace

DivergenceError::DivergenceError(const std::string& what, Vector iterate, long iteration)
    : std::runtime_error(with_iteration(what, iteration)),
      detail_(what),
      iterate_(std::move(iterate)),
      iteration_(iteration) {}

DivergenceError DivergenceError::at_iteration(long iteration) const {
  return DivergenceError(detail_, iterate_, iteration);
}

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

ModelVector::ModelVector(Vector entries) : entries_(std::move(entries)) {
  if (entries_.size() < 1) throw std::invalid_argument("ModelVector: dimension must be >= 1");
  if (!entries_.allFinite()) throw std::invalid_argument("ModelVector: entries must be finite");
}

PreferenceVector::PreferenceVector(Vector entries) : entries_(std::move(entries)) {
  if (entries_.size() < 1) throw std::invalid_argument("PreferenceVector: need at least one weight");
  for (Index k = 0; k < entries_.size(); ++k) {
    if (!std::isfinite(entries_[k]) || entries_[k] <= 0.0) {
      throw std::invalid_argument("PreferenceVector: weights must be finite and strictly positive");
    }
  }
}

Vector LrOperator::apply(const Vector& v) const {
  const Vector& r = r_.entries();
  require_same_size(r.size(), v.size(), "lr_apply");
  Vector rv = r.cwiseProduct(v);
  rv.array() -= rv.mean();
  return r.cwiseProduct(rv);
}

double LrOperator::quadratic_form(const Vector& v) const {
  const Vector& r = r_.entries();
  require_same_size(r.size(), v.size(), "fairness_residual");
  Vector rv = r.cwiseProduct(v);
  rv.array() -= rv.mean();
  return rv.squaredNorm();
}

Vector lr_apply(const PreferenceVector& r, const Vector& v) { return LrOperator(r).apply(v); }

Matrix lr_dense(const PreferenceVector& r) {
  const Index K = r.size();
  Matrix centering = Matrix::Identity(K, K);
  centering.array() -= 1.0 / static_cast<double>(K);
  return r.entries().asDiagonal() * centering * r.entries().asDiagonal();
}

double fairness_residual(const PreferenceVector& r, const Vector& jvals) {
  return LrOperator(r).quadratic_form(jvals);
}

double minmax_value(const PreferenceVector& r, const Vector& jvals) {
  require_same_size(r.size(), jvals.size(), "minmax_value");
  return r.entries().cwiseProduct(jvals).maxCoeff();
}

Matrix finite_diff_jacobian(const ObjectiveSet& obj, const ModelVector& w, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_jacobian: step h must be positive");
  const Index d = w.dim();
  Matrix jac(d, obj.count());
  Vector probe = w.entries();
  for (Index j = 0; j < d; ++j) {
    const double original = probe[j];
    probe[j] = original + h;
    const Vector forward = obj.values(ModelVector(probe));
    probe[j] = original - h;
    const Vector backward = obj.values(ModelVector(probe));
    probe[j] = original;
    jac.row(j) = ((forward - backward) / (2.0 * h)).transpose();
  }
  return jac;
}

}  // namespace epoal
