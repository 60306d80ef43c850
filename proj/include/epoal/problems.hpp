/**
 * @file problems.hpp
 * @brief Seeded synthetic problem families and sampling procedures.
 *
 * Convex family:      J_k(w) = sqrt(1 + ||w - w_k||^2) - 1
 * Non-convex family:  J_k(w) = 1 - exp(-||w - w_k||^2)
 *
 * Anchors w_k lie on the unit sphere. All randomness derives from 64-bit
 * seeds, split into independent streams by fixed domain tags, so a problem
 * instance is a pure function of (kind, d, K, seed).
 */

#pragma once

#include "epoal/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace epoal {

enum class ProblemKind { ConvexDistance, NonconvexGaussian, Fig1Pair };

std::string_view to_string(ProblemKind kind);
std::optional<ProblemKind> parse_problem_kind(std::string_view name);

/// Stream tags for derive_seed.
enum class SeedDomain : std::uint64_t {
  Anchors = 0x616e63686f727321ULL,
  Preference = 0x7072656665722121ULL,
  Initial = 0x696e697469616c21ULL,
  TieBreak = 0x7469656272656b21ULL,
  Trial = 0x747269616c732121ULL,
};

/// Mixes `seed` with a domain tag and an optional index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, SeedDomain domain, std::uint64_t index = 0);

Evaluation eval_convex(const Matrix& anchors, const Vector& w);
Evaluation eval_nonconvex(const Matrix& anchors, const Vector& w);

/// K x d matrix of unit-norm rows, each a normalized standard-normal draw.
Matrix gen_anchors(Index d, Index K, std::uint64_t seed);

/// Uniform on {y in simplex : y_k > 1/(3K)}, via y = 1/(3K) + (2/3) z with z uniform on the simplex.
PreferenceVector sample_preference(Index K, std::uint64_t seed);

/// Uniform point on the unit sphere in R^d.
ModelVector sample_initial(Index d, std::uint64_t seed);

class SyntheticProblem final : public ObjectiveSet {
 public:
  /// `anchors` is K x d, one anchor per row.
  SyntheticProblem(ProblemKind kind, Matrix anchors, std::uint64_t seed);

  ProblemKind kind() const noexcept { return kind_; }
  const Matrix& anchors() const noexcept { return anchors_; }
  std::uint64_t seed() const noexcept { return seed_; }

  Index count() const override { return anchors_.rows(); }
  Index dim() const override { return anchors_.cols(); }

  Vector values(const ModelVector& w) const override;
  Evaluation evaluate(const ModelVector& w) const override;

 private:
  ProblemKind kind_;
  Matrix anchors_;
  Matrix centres_;  // anchors_ transposed: one contiguous column per anchor
  std::uint64_t seed_;
};

/// Random instance of the convex or non-convex family.
SyntheticProblem make_problem(ProblemKind kind, Index d, Index K, std::uint64_t seed);

/// Two Gaussian-well objectives anchored at +1/sqrt(d) and -1/sqrt(d) (all coordinates).
SyntheticProblem fig1_problem(Index d);

/**
 * Plain-text problem record:
 *
 *     epoal-problem 1
 *     kind <convex-distance|nonconvex-gaussian|fig1-pair>
 *     d <int>
 *     K <int>
 *     seed <uint64>
 *     anchors
 *     <d space-separated decimals>   (K lines)
 */
void write_problem(std::ostream& out, const SyntheticProblem& problem);

/// Malformed problem or model-vector text.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws FormatError on malformed input.
SyntheticProblem read_problem(std::istream& in);

/// One decimal coordinate per line; blank lines are ignored. Throws FormatError.
ModelVector read_model_vector(std::istream& in);
void write_model_vector(std::ostream& out, const ModelVector& w);

}  // namespace epoal
