#include "epoal/problems.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace epoal {

namespace {

constexpr double kMinDrawNorm = 1e-8;

void require_dims(const Matrix& anchors, const Vector& w) {
  if (anchors.cols() != w.size()) {
    throw std::invalid_argument("problem evaluation: anchors have " + std::to_string(anchors.cols()) +
                                " columns but w has length " + std::to_string(w.size()));
  }
}

// `centres` is d x K with one anchor per column, so each gradient column is a
// contiguous difference.
Evaluation convex_from_centres(const Matrix& centres, const Vector& w) {
  const Index K = centres.cols();
  Evaluation out{Vector(K), Matrix(w.size(), K)};
  for (Index k = 0; k < K; ++k) {
    out.jacobian.col(k) = w - centres.col(k);
    const double root = std::sqrt(1.0 + out.jacobian.col(k).squaredNorm());
    out.values[k] = root - 1.0;
    out.jacobian.col(k) /= root;
  }
  return out;
}

Evaluation nonconvex_from_centres(const Matrix& centres, const Vector& w) {
  const Index K = centres.cols();
  Evaluation out{Vector(K), Matrix(w.size(), K)};
  for (Index k = 0; k < K; ++k) {
    out.jacobian.col(k) = w - centres.col(k);
    const double well = std::exp(-out.jacobian.col(k).squaredNorm());
    out.values[k] = 1.0 - well;
    out.jacobian.col(k) *= 2.0 * well;
  }
  return out;
}

Vector unit_gaussian_draw(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  for (;;) {
    for (Index j = 0; j < d; ++j) v[j] = normal(rng);
    const double norm = v.norm();
    if (norm >= kMinDrawNorm) return v / norm;
  }
}

std::string next_content_line(std::istream& in, int& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    return line.substr(first);
  }
  throw FormatError("unexpected end of input after line " + std::to_string(line_no));
}

template <typename T>
T parse_keyed(std::istream& in, int& line_no, const std::string& key) {
  std::istringstream fields(next_content_line(in, line_no));
  std::string got;
  T value{};
  if (!(fields >> got) || got != key || !(fields >> value)) {
    throw FormatError("line " + std::to_string(line_no) + ": expected '" + key + " <value>'");
  }
  std::string extra;
  if (fields >> extra) throw FormatError("line " + std::to_string(line_no) + ": trailing input");
  return value;
}

double parse_double_token(const std::string& token, int line_no) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": not a number: '" + token + "'");
  }
  if (used != token.size() || !std::isfinite(value)) {
    throw FormatError("line " + std::to_string(line_no) + ": not a finite number: '" + token + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::ConvexDistance:
      return "convex-distance";
    case ProblemKind::NonconvexGaussian:
      return "nonconvex-gaussian";
    case ProblemKind::Fig1Pair:
      return "fig1-pair";
  }
  return "unknown";
}

std::optional<ProblemKind> parse_problem_kind(std::string_view name) {
  if (name == "convex-distance" || name == "convex") return ProblemKind::ConvexDistance;
  if (name == "nonconvex-gaussian" || name == "nonconvex") return ProblemKind::NonconvexGaussian;
  if (name == "fig1-pair" || name == "fig1") return ProblemKind::Fig1Pair;
  return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t seed, SeedDomain domain, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(domain)) ^ index);
}

Evaluation eval_convex(const Matrix& anchors, const Vector& w) {
  require_dims(anchors, w);
  return convex_from_centres(anchors.transpose(), w);
}

Evaluation eval_nonconvex(const Matrix& anchors, const Vector& w) {
  require_dims(anchors, w);
  return nonconvex_from_centres(anchors.transpose(), w);
}

Matrix gen_anchors(Index d, Index K, std::uint64_t seed) {
  if (d < 1 || K < 1) throw std::invalid_argument("gen_anchors: need d >= 1 and K >= 1");
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Anchors));
  Matrix anchors(K, d);
  for (Index k = 0; k < K; ++k) anchors.row(k) = unit_gaussian_draw(d, rng).transpose();
  return anchors;
}

PreferenceVector sample_preference(Index K, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("sample_preference: need K >= 1");
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Preference));
  std::exponential_distribution<double> spacing(1.0);
  Vector z(K);
  for (Index k = 0; k < K; ++k) {
    do {
      z[k] = spacing(rng);
    } while (!(z[k] > 0.0));
  }
  z /= z.sum();
  const double floor = 1.0 / (3.0 * static_cast<double>(K));
  Vector y = (2.0 / 3.0) * z;
  y.array() += floor;
  return PreferenceVector(std::move(y));
}

ModelVector sample_initial(Index d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("sample_initial: need d >= 1");
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Initial));
  return ModelVector(unit_gaussian_draw(d, rng));
}

SyntheticProblem::SyntheticProblem(ProblemKind kind, Matrix anchors, std::uint64_t seed)
    : kind_(kind), anchors_(std::move(anchors)), centres_(anchors_.transpose()), seed_(seed) {
  if (anchors_.rows() < 1 || anchors_.cols() < 1) {
    throw std::invalid_argument("SyntheticProblem: need at least one anchor of dimension >= 1");
  }
  if (!anchors_.allFinite()) throw std::invalid_argument("SyntheticProblem: anchors must be finite");
}

Evaluation SyntheticProblem::evaluate(const ModelVector& w) const {
  if (w.dim() != dim()) throw std::invalid_argument("SyntheticProblem::evaluate: dimension mismatch");
  if (kind_ == ProblemKind::ConvexDistance) return convex_from_centres(centres_, w.entries());
  return nonconvex_from_centres(centres_, w.entries());
}

Vector SyntheticProblem::values(const ModelVector& w) const {
  const Vector& x = w.entries();
  if (x.size() != dim()) throw std::invalid_argument("SyntheticProblem::values: dimension mismatch");
  const Vector sq = (centres_.colwise() - x).colwise().squaredNorm().transpose();
  if (kind_ == ProblemKind::ConvexDistance) return ((1.0 + sq.array()).sqrt() - 1.0).matrix();
  return (1.0 - (-sq.array()).exp()).matrix();
}

SyntheticProblem make_problem(ProblemKind kind, Index d, Index K, std::uint64_t seed) {
  if (kind == ProblemKind::Fig1Pair) {
    if (K != 2) throw std::invalid_argument("make_problem: fig1-pair has K = 2");
    return fig1_problem(d);
  }
  return SyntheticProblem(kind, gen_anchors(d, K, seed), seed);
}

SyntheticProblem fig1_problem(Index d) {
  if (d < 1) throw std::invalid_argument("fig1_problem: need d >= 1");
  const double c = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix anchors(2, d);
  anchors.row(0).setConstant(c);
  anchors.row(1).setConstant(-c);
  return SyntheticProblem(ProblemKind::Fig1Pair, std::move(anchors), 0);
}

void write_problem(std::ostream& out, const SyntheticProblem& problem) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoal-problem 1\n"
      << "kind " << to_string(problem.kind()) << '\n'
      << "d " << problem.dim() << '\n'
      << "K " << problem.count() << '\n'
      << "seed " << problem.seed() << '\n'
      << "anchors\n";
  for (Index k = 0; k < problem.count(); ++k) {
    for (Index j = 0; j < problem.dim(); ++j) {
      if (j) out << ' ';
      out << problem.anchors()(k, j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

SyntheticProblem read_problem(std::istream& in) {
  int line_no = 0;
  if (parse_keyed<int>(in, line_no, "epoal-problem") != 1) {
    throw FormatError("unsupported problem record version");
  }
  const auto kind_name = parse_keyed<std::string>(in, line_no, "kind");
  const auto kind = parse_problem_kind(kind_name);
  if (!kind) throw FormatError("line " + std::to_string(line_no) + ": unknown kind '" + kind_name + "'");
  const auto d = parse_keyed<long>(in, line_no, "d");
  const auto K = parse_keyed<long>(in, line_no, "K");
  const auto seed = parse_keyed<std::uint64_t>(in, line_no, "seed");
  if (d < 1 || K < 1) throw FormatError("d and K must be positive");
  if (next_content_line(in, line_no) != "anchors") {
    throw FormatError("line " + std::to_string(line_no) + ": expected 'anchors'");
  }
  Matrix anchors(K, d);
  for (long k = 0; k < K; ++k) {
    std::istringstream row(next_content_line(in, line_no));
    std::string token;
    long j = 0;
    while (row >> token) {
      if (j >= d) throw FormatError("line " + std::to_string(line_no) + ": too many coordinates");
      anchors(k, j++) = parse_double_token(token, line_no);
    }
    if (j != d) throw FormatError("line " + std::to_string(line_no) + ": too few coordinates");
  }
  return SyntheticProblem(*kind, std::move(anchors), seed);
}

ModelVector read_model_vector(std::istream& in) {
  std::vector<double> coords;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::string extra;
    if (fields >> extra) {
      throw FormatError("line " + std::to_string(line_no) + ": expected one coordinate per line");
    }
    coords.push_back(parse_double_token(token, line_no));
  }
  if (coords.empty()) throw FormatError("model vector file is empty");
  return ModelVector(Eigen::Map<const Vector>(coords.data(), static_cast<Index>(coords.size())));
}

void write_model_vector(std::ostream& out, const ModelVector& w) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (Index j = 0; j < w.dim(); ++j) out << w[j] << '\n';
  out.precision(old_precision);
}

}  // namespace epoal
