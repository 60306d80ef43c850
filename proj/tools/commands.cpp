#include "commands.hpp"

#include "epoal/diagnostics.hpp"
#include "epoal/harness.hpp"
#include "epoal/problems.hpp"
#include "epoal/solvers.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace epoal::cli {

namespace {

using nlohmann::json;

constexpr const char* kToolName = "epoal";
constexpr const char* kVersion = EPOAL_VERSION;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) throw UsageError("empty entry in list '" + text + "'");
    items.push_back(item);
  }
  if (items.empty()) throw UsageError("empty list");
  return items;
}

double parse_number(const std::string& token) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw UsageError("not a number: '" + token + "'");
  }
  if (used != token.size() || !std::isfinite(value)) throw UsageError("not a finite number: '" + token + "'");
  return value;
}

PreferenceVector parse_preference(const std::string& text) {
  std::vector<std::string> tokens = split_list(text);
  Vector r(static_cast<Index>(tokens.size()));
  for (std::size_t k = 0; k < tokens.size(); ++k) r[static_cast<Index>(k)] = parse_number(tokens[k]);
  try {
    return PreferenceVector(std::move(r));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

Algorithm parse_algo(const std::string& name) {
  auto algorithm = parse_algorithm(name);
  if (!algorithm) throw UsageError("unknown algorithm '" + name + "'");
  return *algorithm;
}

ProblemKind parse_kind(const std::string& name) {
  auto kind = parse_problem_kind(name);
  if (!kind || *kind == ProblemKind::Fig1Pair) throw UsageError("unknown problem kind '" + name + "'");
  return *kind;
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json header_json(const std::string& command, json config, std::uint64_t seed) {
  return json{{"tool", kToolName}, {"version", kVersion}, {"command", command},
              {"seed", seed}, {"config", std::move(config)}};
}

// Output stream for "-" or a path.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path == "-" || path.empty()) {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot open output file '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

template <typename T>
T read_file(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read '" + path + "'");
  return reader(in);
}

// ---------------------------------------------------------------- trace

struct TraceOptions {
  bool fig1 = false;
  std::string kind = "convex";
  long d = 3;
  long K = 2;
  std::string algo;
  double mu = 0.1;
  double eta = 10.0;
  double tau = 1.0;
  long iters = 1000;
  std::uint64_t seed = 0;
  std::string r;
  std::string out = "-";
  std::string save_problem;
  std::string save_final;
};

void add_trace(CLI::App& app, TraceOptions& opt) {
  auto* fig1 = app.add_flag("--fig1", opt.fig1, "Two Gaussian wells at +-1/sqrt(d) (K = 2)");
  app.add_option("--kind", opt.kind, "Problem family: convex | nonconvex")->excludes(fig1);
  app.add_option("--d", opt.d, "Model dimension")->check(CLI::PositiveNumber);
  app.add_option("--K", opt.K, "Number of objectives")->check(CLI::PositiveNumber);
  app.add_option("--algo", opt.algo, "epo-al | subgradient | smooth-max")->required();
  app.add_option("--mu", opt.mu, "Step size");
  app.add_option("--eta", opt.eta, "Penalty parameter (epo-al)");
  app.add_option("--tau", opt.tau, "Temperature (smooth-max)");
  app.add_option("--iters", opt.iters, "Number of iterations")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", opt.seed, "Seed for anchors, preference, initial point and tie-breaking");
  app.add_option("--r", opt.r, "Comma-separated preference vector (sampled from the seed if omitted)");
  app.add_option("--out", opt.out, "JSON-lines output path ('-' for stdout)");
  app.add_option("--save-problem", opt.save_problem, "Write the problem record here");
  app.add_option("--save-final", opt.save_final, "Write the final model vector here");
}

int cmd_trace(const TraceOptions& opt, std::ostream& out, std::ostream& err) {
  const Algorithm algorithm = parse_algo(opt.algo);
  const Index d = opt.d;
  Index K = opt.K;
  std::optional<SyntheticProblem> problem;
  if (opt.fig1) {
    if (K != 2) throw UsageError("--fig1 requires K = 2");
    problem = fig1_problem(d);
  } else {
    problem = make_problem(parse_kind(opt.kind), d, K, opt.seed);
  }
  const PreferenceVector r = opt.r.empty() ? sample_preference(K, opt.seed) : parse_preference(opt.r);
  if (r.size() != K) throw UsageError("--r has " + std::to_string(r.size()) + " entries, expected K = " + std::to_string(K));
  const ModelVector w0 = sample_initial(d, opt.seed);

  SolverConfig config;
  config.mu = opt.mu;
  config.eta = opt.eta;
  config.tau = opt.tau;
  config.max_iter = opt.iters;
  config.seed = derive_seed(opt.seed, SeedDomain::TieBreak);
  try {
    config.validate(algorithm);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  json cfg{{"problem", std::string(to_string(problem->kind()))},
           {"d", d},
           {"K", K},
           {"algorithm", std::string(to_string(algorithm))},
           {"mu", config.mu},
           {"iters", config.max_iter},
           {"r", vector_json(r.entries())},
           {"w0", vector_json(w0.entries())}};
  if (algorithm == Algorithm::EpoAl) cfg["eta"] = config.eta;
  if (algorithm == Algorithm::SmoothMax) cfg["tau"] = config.tau;

  if (!opt.save_problem.empty()) {
    std::ofstream file(opt.save_problem);
    if (!file) throw std::runtime_error("cannot open '" + opt.save_problem + "'");
    write_problem(file, *problem);
  }

  OutputTarget target(opt.out, out);
  std::ostream& sink = target.stream();
  sink << json{{"header", header_json("trace", cfg, opt.seed)}}.dump() << '\n';

  auto write_record = [&sink](const IterationRecord& rec) {
    json line{{"iter", rec.iter},
              {"jvals", vector_json(rec.jvals)},
              {"minmax", rec.minmax},
              {"fairness", rec.fairness}};
    if (rec.p) line["p"] = vector_json(*rec.p);
    if (rec.active_index) line["active"] = *rec.active_index;
    sink << line.dump() << '\n';
  };

  try {
    const RunOutcome outcome = run(algorithm, *problem, r, w0, config, write_record);
    if (!opt.save_final.empty()) {
      std::ofstream file(opt.save_final);
      if (!file) throw std::runtime_error("cannot open '" + opt.save_final + "'");
      write_model_vector(file, outcome.w);
    }
  } catch (const DivergenceError& e) {
    sink << json{{"error", "divergence"}, {"iter", e.iteration()}, {"message", e.what()}}.dump()
         << '\n';
    sink.flush();
    err << "epoal trace: " << e.what() << '\n';
    return kDivergence;
  }
  sink.flush();
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  std::string kinds = "convex,nonconvex";
  std::string K;
  long d = 100;
  int trials = 30;
  std::uint64_t seed = 0;
  std::string algos = "epo-al,subgradient,smooth-max";
  std::string out;
  double eps = 0.01;
  long max_iter = 1000;
  int jobs = 1;
};

void add_bench(CLI::App& app, BenchOptions& opt) {
  app.add_option("--kinds", opt.kinds, "Comma-separated problem families");
  app.add_option("--K", opt.K, "Comma-separated numbers of objectives")->required();
  app.add_option("--d", opt.d, "Model dimension")->check(CLI::PositiveNumber);
  app.add_option("--trials", opt.trials, "Trials per cell (>= 3)")->check(CLI::Range(3, 1000000));
  app.add_option("--seed", opt.seed, "Master seed");
  app.add_option("--algos", opt.algos, "Comma-separated algorithms");
  app.add_option("--out", opt.out, "CSV output path; metadata goes to <out>.meta.json")->required();
  app.add_option("--eps", opt.eps, "Target tolerance epsilon")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", opt.max_iter, "Iteration budget per run")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", opt.jobs, "Worker threads for tuning")->check(CLI::PositiveNumber);
}

std::string csv_number(double value) {
  if (std::isnan(value)) return "nan";
  return fmt::format("{}", value);
}

int cmd_bench(const BenchOptions& opt, std::ostream& err) {
  if (opt.out == "-") throw UsageError("bench needs a file for --out (metadata goes to <out>.meta.json)");
  ExperimentSpec spec;
  spec.kinds.clear();
  for (const auto& name : split_list(opt.kinds)) spec.kinds.push_back(parse_kind(name));
  for (const auto& token : split_list(opt.K)) {
    const double K = parse_number(token);
    if (K < 1 || K != std::floor(K)) throw UsageError("--K entries must be positive integers");
    spec.K_values.push_back(static_cast<Index>(K));
  }
  spec.algorithms.clear();
  for (const auto& name : split_list(opt.algos)) spec.algorithms.push_back(parse_algo(name));
  spec.d = opt.d;
  spec.n_trials = opt.trials;
  spec.master_seed = opt.seed;
  spec.grid = GridSpec::standard();
  spec.grid.epsilon = opt.eps;
  spec.grid.max_iter = opt.max_iter;
  spec.jobs = opt.jobs;

  ExperimentResult result;
  try {
    result = run_experiment(spec);
  } catch (const HarnessError& e) {
    err << "epoal bench: " << e.what() << '\n';
    return kInternal;
  }

  {
    std::ofstream csv(opt.out);
    if (!csv) throw std::runtime_error("cannot open '" + opt.out + "'");
    csv << "kind,algorithm,K,d,trials,n_censored,i_o_mean,i_o_ci_low,i_o_ci_high,"
           "t_o_mean,t_o_ci_low,t_o_ci_high,master_seed\n";
    for (const AggregateRecord& agg : result.aggregates) {
      csv << to_string(agg.kind) << ',' << to_string(agg.algorithm) << ',' << agg.K << ',' << agg.d
          << ',' << agg.n_trials << ',' << agg.n_censored << ',' << csv_number(agg.iterations.mean)
          << ',' << csv_number(agg.iterations.lo) << ',' << csv_number(agg.iterations.hi) << ','
          << csv_number(agg.seconds.mean) << ',' << csv_number(agg.seconds.lo) << ','
          << csv_number(agg.seconds.hi) << ',' << opt.seed << '\n';
    }
  }

  json kinds = json::array();
  for (ProblemKind k : spec.kinds) kinds.push_back(std::string(to_string(k)));
  json algos = json::array();
  for (Algorithm a : spec.algorithms) algos.push_back(std::string(to_string(a)));
  json config{{"kinds", kinds},
              {"K", spec.K_values},
              {"d", spec.d},
              {"trials", spec.n_trials},
              {"algorithms", algos},
              {"mu_grid", spec.grid.mu_grid},
              {"eta_grid", spec.grid.eta_grid},
              {"tau_grid", spec.grid.tau_grid},
              {"max_iter", spec.grid.max_iter},
              {"epsilon", spec.grid.epsilon},
              {"jobs", spec.jobs}};
  json trials = json::array();
  for (const TrialRecord& t : result.trials) {
    json row{{"kind", std::string(to_string(t.kind))},
             {"algorithm", std::string(to_string(t.algorithm))},
             {"K", t.K},
             {"seed", t.seed},
             {"target", t.target},
             {"i_o", t.i_o ? json(*t.i_o) : json(nullptr)},
             {"t_o", t.t_o ? json(*t.t_o) : json(nullptr)},
             {"mu", t.best_config.mu}};
    if (t.algorithm == Algorithm::EpoAl) row["eta"] = t.best_config.eta;
    if (t.algorithm == Algorithm::SmoothMax) row["tau"] = t.best_config.tau;
    trials.push_back(std::move(row));
  }
  json meta{{"header", header_json("bench", config, opt.seed)},
            {"target", "minimum of max_k r_k J_k over all subgradient runs (mu grid) and iterates"},
            {"censoring", "configs never within epsilon of the target are censored and excluded"},
            {"ci_method", "normal approximation on the min/max-trimmed sample, level 0.99, z = 2.5758"},
            {"timing", "t_o is the median of 3 single-threaded re-runs of the best config for i_o "
                       "iterations on a monotonic clock; timing columns are not reproducible"},
            {"trials", trials}};
  std::ofstream meta_file(opt.out + ".meta.json");
  if (!meta_file) throw std::runtime_error("cannot open '" + opt.out + ".meta.json'");
  meta_file << meta.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- certify

struct CertifyOptions {
  std::string problem;
  std::string model;
  std::string r;
  std::optional<double> fair_tol;
  std::optional<double> gap_tol;
};

void add_certify(CLI::App& app, CertifyOptions& opt) {
  app.add_option("--problem", opt.problem, "Problem record file")->required();
  app.add_option("--model", opt.model, "Model vector file, one coordinate per line")->required();
  app.add_option("--r", opt.r, "Comma-separated preference vector")->required();
  app.add_option("--fair-tol", opt.fair_tol, "Fairness tolerance (default 1e-8 (max r_k J_k)^2)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--gap-tol", opt.gap_tol, "Stationarity tolerance (default 1e-4 max ||grad J_k||)")
      ->check(CLI::NonNegativeNumber);
}

int cmd_certify(const CertifyOptions& opt, std::ostream& out, std::ostream& err) {
  const PreferenceVector r = parse_preference(opt.r);
  std::optional<SyntheticProblem> problem;
  std::optional<ModelVector> w;
  try {
    problem = read_file<SyntheticProblem>(opt.problem, &read_problem);
    w = read_file<ModelVector>(opt.model, &read_model_vector);
  } catch (const FormatError& e) {
    err << "epoal certify: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "epoal certify: " << e.what() << '\n';
    return kDataError;
  }
  if (w->dim() != problem->dim()) {
    err << "epoal certify: model has " << w->dim() << " coordinates, problem has d = "
        << problem->dim() << '\n';
    return kDataError;
  }
  if (r.size() != problem->count()) throw UsageError("--r length differs from the problem's K");

  const Evaluation eval = problem->evaluate(*w);
  const CertificateTolerances defaults = default_tolerances(r, eval);
  const EpoCertificate cert =
      certify_epo(eval, r, opt.fair_tol.value_or(defaults.fair_tol), opt.gap_tol.value_or(defaults.gap_tol));

  json report{{"tool", kToolName},
              {"version", kVersion},
              {"fairness", cert.fairness},
              {"stationarity_gap", cert.stationarity_gap},
              {"is_fair", cert.is_fair},
              {"is_stationary", cert.is_stationary},
              {"minmax", cert.minmax},
              {"fair_tol", cert.fair_tol},
              {"gap_tol", cert.gap_tol}};
  out << report.dump() << '\n';
  return cert.is_fair && cert.is_stationary ? kOk : kNotCertified;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted min-max multi-objective solvers and benchmark harness", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  TraceOptions trace_opt;
  BenchOptions bench_opt;
  CertifyOptions certify_opt;
  auto* trace = app.add_subcommand("trace", "Write a per-iteration JSON-lines trace");
  auto* bench = app.add_subcommand("bench", "Run the tuning/complexity benchmark and write a CSV");
  auto* certify = app.add_subcommand("certify", "Check fairness and Pareto stationarity of a model");
  add_trace(*trace, trace_opt);
  add_bench(*bench, bench_opt);
  add_certify(*certify, certify_opt);

  std::vector<const char*> argv{kToolName};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*trace) return cmd_trace(trace_opt, out, err);
    if (*bench) return cmd_bench(bench_opt, err);
    if (*certify) return cmd_certify(certify_opt, out, err);
  } catch (const UsageError& e) {
    err << "epoal: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "epoal: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "epoal: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace epoal::cli
