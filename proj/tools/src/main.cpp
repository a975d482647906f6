// truncgraph: command-line front end.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
// failure, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "truncgraph/diagnostics.hpp"
#include "truncgraph/errors.hpp"
#include "truncgraph/experiment.hpp"
#include "truncgraph/glasso.hpp"
#include "truncgraph/io.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"
#include "truncgraph/version.hpp"

namespace fs = std::filesystem;
namespace tg = truncgraph;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kInvalid = 2, kNumerical = 3 };

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tg::ValidationError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_edges(const fs::path& path, const tg::EdgeSet& edges) {
  auto out = open_out(path);
  out << "j,k\n";
  for (const auto& [j, k] : edges) out << fmt::format("{},{}\n", j + 1, k + 1);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tg::ValidationError("cannot open '" + path.string() + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw tg::ValidationError(path.string() + ": " + e.what());
  }
}

// Flags shared by simulate and diagnose.
struct GraphFlags {
  std::string structure = "chain";
  std::size_t p = 10;
  double edge_prob = 0.02;
  std::size_t groups = 1;
  double strength = tg::kDefaultStrength;
  std::optional<std::uint64_t> graph_seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--structure", structure, "chain, random or hub")->capture_default_str();
    cmd->add_option("--p", p, "number of variables")->capture_default_str();
    cmd->add_option("--edge-prob", edge_prob, "edge probability (random)")->capture_default_str();
    cmd->add_option("--groups", groups, "number of hubs (hub)")->capture_default_str();
    cmd->add_option("--strength", strength, "off-diagonal precision weight")->capture_default_str();
    cmd->add_option("--graph-seed", graph_seed, "seed of the random graph");
  }

  tg::GraphSpec spec(std::uint64_t fallback_seed) const {
    tg::GraphSpec g;
    g.structure = tg::parse_graph_structure(structure);
    g.p = p;
    g.edge_prob = edge_prob;
    g.groups = groups;
    g.strength = strength;
    g.seed = graph_seed.value_or(fallback_seed);
    return g;
  }
};

struct SchemeFlags {
  std::string kind = "identical";
  double a = -0.5;
  double b = 2.0;
  double b_last = 0.5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--scheme", kind, "identical or decreasing")->capture_default_str();
    cmd->add_option("--a", a, "lower bound")->capture_default_str();
    cmd->add_option("--b", b, "upper bound (first upper bound when decreasing)")->capture_default_str();
    cmd->add_option("--b-last", b_last, "last upper bound (decreasing)")->capture_default_str();
  }

  tg::SchemeSpec spec() const {
    tg::SchemeSpec s;
    s.kind = tg::parse_scheme_kind(kind);
    if (s.kind == tg::SchemeKind::custom) {
      throw tg::ValidationError("--scheme custom is only available through a scheme file or config");
    }
    s.a = a;
    s.b = b;
    s.b_last = b_last;
    return s;
  }
};

struct EstimatorFlags {
  tg::PairEstimatorConfig pair;
  double eps_psd = tg::kDefaultPsdFloor;
  unsigned workers = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--delta", pair.delta, "search margin from +-1")->capture_default_str();
    cmd->add_option("--grid", pair.grid_points, "coarse grid size")->capture_default_str();
    cmd->add_option("--tol-sigma", pair.tol_sigma, "refinement tolerance")->capture_default_str();
    cmd->add_option("--eps-psd", eps_psd, "eigenvalue floor of the PSD repair")->capture_default_str();
    cmd->add_option("--workers", workers, "threads (0 = all cores)")->capture_default_str();
  }
};

tg::ZeroInflatedMatrix load_data(const fs::path& data, const tg::TruncationScheme& scheme) {
  Eigen::MatrixXd values = tg::read_matrix_csv(data);
  if (static_cast<std::size_t>(values.cols()) != scheme.dimension()) {
    throw tg::ValidationError(fmt::format("{} has {} columns but the scheme describes {} variables",
                                          data.string(), values.cols(), scheme.dimension()));
  }
  return tg::ZeroInflatedMatrix(std::move(values), scheme);
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  GraphFlags graph;
  SchemeFlags scheme;
  std::size_t n = 500;
  std::uint64_t seed = 0;
  fs::path out_dir = ".";
};

int run_simulate(const SimulateArgs& args) {
  const tg::GraphSpec spec = args.graph.spec(tg::derive_seed(args.seed, 0, 0));
  const tg::GroundTruth truth = tg::make_ground_truth(spec);
  const tg::TruncationScheme scheme = tg::make_scheme(args.scheme.spec(), spec.p);
  const tg::ZeroInflatedMatrix data =
      tg::truncate(tg::sample_latent(truth, args.n, tg::derive_seed(args.seed, 0, 1)), scheme);

  fs::create_directories(args.out_dir);
  tg::write_matrix_csv(args.out_dir / "data.csv", data.values());
  tg::write_scheme_csv(args.out_dir / "scheme.csv", scheme);
  tg::write_matrix_csv(args.out_dir / "sigma_star.csv", truth.sigma_star);
  tg::write_matrix_csv(args.out_dir / "theta_star.csv", truth.theta_star);
  write_edges(args.out_dir / "edges_star.csv", truth.edges);
  return kOk;
}

// ---- estimate-cov ----------------------------------------------------------

struct EstimateArgs {
  fs::path data;
  fs::path scheme;
  fs::path out;
  fs::path flags;
  EstimatorFlags estimator;
};

int run_estimate(const EstimateArgs& args) {
  const tg::TruncationScheme scheme = tg::read_scheme_csv(args.scheme);
  const tg::ZeroInflatedMatrix data = load_data(args.data, scheme);
  const tg::CovarianceEstimate raw =
      tg::estimate_covariance(data, scheme, args.estimator.pair, args.estimator.workers);
  const tg::CovarianceEstimate repaired = tg::psd_repair(raw, args.estimator.eps_psd);
  tg::write_matrix_csv(args.out, repaired.matrix);

  const fs::path flags = args.flags.empty() ? fs::path(args.out).replace_extension(".flags.csv") : args.flags;
  auto out = open_out(flags);
  out << "j,k,sigma_raw,sigma,degenerate,tie,local_maxima\n";
  for (const auto& r : raw.pairs) {
    const auto j = static_cast<Eigen::Index>(r.j), k = static_cast<Eigen::Index>(r.k);
    out << fmt::format("{},{},{},{},{},{},{}\n", r.j + 1, r.k + 1, r.estimate.sigma,
                       repaired.matrix(j, k), int(r.estimate.degenerate), int(r.estimate.tie),
                       r.estimate.local_maxima);
  }
  if (raw.degenerate_count() > 0 || raw.tie_count() > 0) {
    fmt::print(std::cerr, "warning: {} degenerate and {} tied pairs (see {})\n", raw.degenerate_count(),
               raw.tie_count(), flags.string());
  }
  if (repaired.matrix != raw.matrix) {
    fmt::print(std::cerr, "note: the pairwise estimate was not positive definite and was repaired\n");
  }
  return kOk;
}

// ---- glasso ----------------------------------------------------------------

struct GlassoArgs {
  fs::path cov;
  fs::path data;
  fs::path scheme;
  std::string method = "ours";
  std::optional<double> lambda;
  std::string select;
  std::size_t n = 0;
  double gamma = tg::kDefaultEbicGamma;
  std::size_t subsamples = 20;
  double beta = 0.05;
  std::uint64_t seed = 0;
  std::size_t path_length = tg::kDefaultPathLength;
  double ratio = tg::kDefaultPathRatio;
  tg::GlassoOptions solver;
  double edge_zero_tol = tg::kDefaultEdgeZeroTol;
  EstimatorFlags estimator;
  fs::path out_dir = ".";
};

int run_glasso(const GlassoArgs& args) {
  const bool from_data = !args.data.empty();
  if (from_data == !args.cov.empty()) {
    throw tg::ValidationError("give either --cov or --data with --scheme");
  }
  if (args.lambda.has_value() == !args.select.empty()) {
    throw tg::ValidationError("give exactly one of --lambda and --select");
  }

  std::optional<tg::ZeroInflatedMatrix> data;
  std::optional<tg::TruncationScheme> scheme;
  tg::CovarianceBuilder builder;
  Eigen::MatrixXd S;
  if (from_data) {
    if (args.scheme.empty()) throw tg::ValidationError("--data requires --scheme");
    scheme.emplace(tg::read_scheme_csv(args.scheme));
    data.emplace(load_data(args.data, *scheme));
    const tg::Method method = tg::parse_method(args.method);
    builder = [&](const std::vector<std::size_t>& rows) -> Eigen::MatrixXd {
      const tg::ZeroInflatedMatrix sample = rows.size() == data->rows() ? *data : data->select_rows(rows);
      if (method == tg::Method::baseline) return tg::baseline_covariance(sample).matrix;
      const auto raw = tg::estimate_covariance(sample, *scheme, args.estimator.pair, args.estimator.workers);
      return tg::psd_repair(raw, args.estimator.eps_psd).matrix;
    };
    std::vector<std::size_t> all(data->rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    S = builder(all);
  } else {
    S = tg::read_matrix_csv(args.cov);
  }

  json summary;
  tg::PrecisionEstimate est;
  if (args.lambda) {
    est = tg::graphical_lasso(S, *args.lambda, args.solver);
    summary["selection"] = "fixed";
  } else {
    const auto path = tg::lambda_path(S, args.path_length, args.ratio);
    tg::Selection sel;
    if (args.select == "ebic") {
      const std::size_t n = from_data ? data->rows() : args.n;
      if (n < 2) throw tg::ValidationError("--select ebic with --cov needs the sample size --n");
      sel = tg::ebic_select(S, n, path, args.gamma, args.solver);
    } else if (args.select == "stars") {
      if (!from_data) throw tg::ValidationError("--select stars needs the raw sample (--data, --scheme)");
      sel = tg::stars_select(builder, data->rows(), path, {args.subsamples, args.beta, 1}, args.seed,
                             args.solver);
    } else {
      throw tg::ValidationError("unknown selection '" + args.select + "' (expected ebic or stars)");
    }
    est = std::move(sel.estimate);
    summary["selection"] = args.select;
    summary["path"] = path;
    summary["path_index"] = sel.index;
    summary["scores"] = sel.scores;
  }

  const tg::EdgeSet edges = tg::edge_set(est, args.edge_zero_tol);
  fs::create_directories(args.out_dir);
  tg::write_matrix_csv(args.out_dir / "theta.csv", est.theta);
  tg::write_matrix_csv(args.out_dir / "w.csv", est.w);
  write_edges(args.out_dir / "edges.csv", edges);
  summary["lambda"] = est.lambda;
  summary["kkt_residual"] = est.kkt_residual;
  summary["iterations"] = est.iterations;
  summary["edges"] = edges.size();
  write_json(args.out_dir / "glasso.json", summary);
  return kOk;
}

// ---- run-experiment --------------------------------------------------------

struct ExperimentArgs {
  fs::path config;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::optional<unsigned> workers;
  std::optional<std::string> structure;
  std::optional<std::size_t> p;
  std::optional<std::size_t> n;
  std::optional<std::size_t> repetitions;
  std::optional<std::string> scheme;
  std::optional<double> a, b, b_last;
  std::vector<std::string> methods;
  std::optional<std::string> select;
};

int run_experiment_command(const ExperimentArgs& args) {
  tg::ExperimentConfig config = args.config.empty() ? tg::ExperimentConfig{}
                                                    : tg::config_from_json(read_json_file(args.config));
  config.seed = args.seed;
  if (args.structure) config.graph.structure = tg::parse_graph_structure(*args.structure);
  if (args.p) config.graph.p = *args.p;
  if (args.n) config.n = *args.n;
  if (args.repetitions) config.repetitions = *args.repetitions;
  if (args.scheme) config.scheme.kind = tg::parse_scheme_kind(*args.scheme);
  if (args.a) config.scheme.a = *args.a;
  if (args.b) config.scheme.b = *args.b;
  if (args.b_last) config.scheme.b_last = *args.b_last;
  if (!args.methods.empty()) {
    config.methods.clear();
    for (const auto& m : args.methods) config.methods.push_back(tg::parse_method(m));
  }
  if (args.select) config.selection.kind = tg::parse_selection_kind(*args.select);
  if (args.workers) config.workers = *args.workers;
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;

  const tg::ExperimentResult result = tg::run_experiment(config);
  for (const auto& rep : result.repetitions) {
    if (rep.error) fmt::print(std::cerr, "warning: repetition {} failed and was excluded: {}\n", rep.index, *rep.error);
  }
  fs::create_directories(config.output_dir);
  {
    auto out = open_out(config.output_dir / "detection.csv");
    tg::write_detection_csv(out, result);
  }
  write_json(config.output_dir / "metadata.json", tg::experiment_metadata(result));
  for (const auto& report : result.reports) {
    fmt::print("{}: mean true-edge detection {:.4f}, other false {:.4f}\n", tg::to_string(report.method),
               report.mean_rate(tg::EdgeLabel::true_edge), report.mean_rate(tg::EdgeLabel::other_false));
  }
  return kOk;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
  GraphFlags graph;
  fs::path sigma;
  std::uint64_t seed = 0;
  fs::path out;
};

int run_diagnose(const DiagnoseArgs& args) {
  const tg::GroundTruth truth = args.sigma.empty()
                                    ? tg::make_ground_truth(args.graph.spec(tg::derive_seed(args.seed, 0, 0)))
                                    : tg::ground_truth_from_covariance(tg::read_matrix_csv(args.sigma));
  const tg::TheoryConstants c = tg::theory_constants(truth);
  const json report = {{"p", truth.sigma_star.rows()},
                       {"edges", truth.edges.size()},
                       {"incoherence_alpha", tg::incoherence_alpha(truth)},
                       {"max_degree", c.max_degree},
                       {"kappa_sigma", c.kappa_sigma},
                       {"kappa_gamma", c.kappa_gamma}};
  if (args.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(args.out, report);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph structure estimation from zero-inflated, doubly truncated Gaussian data"};
  app.set_version_flag("--version", std::string(tg::kVersion));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "draw a ground truth and one truncated sample");
  sim.graph.attach(simulate);
  sim.scheme.attach(simulate);
  simulate->add_option("--n", sim.n, "sample size")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "random seed")->required();
  simulate->add_option("--out-dir", sim.out_dir, "output directory")->capture_default_str();

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate-cov", "pairwise likelihood covariance estimate");
  estimate->add_option("--data", est.data, "data CSV (0 = censored)")->required();
  estimate->add_option("--scheme", est.scheme, "scheme CSV (index,a,b)")->required();
  estimate->add_option("--out", est.out, "output covariance CSV")->required();
  estimate->add_option("--flags", est.flags, "per-pair flags CSV (default: <out>.flags.csv)");
  est.estimator.attach(estimate);

  GlassoArgs gl;
  auto* glasso = app.add_subcommand("glasso", "graphical lasso with a fixed or selected penalty");
  glasso->add_option("--cov", gl.cov, "covariance CSV");
  glasso->add_option("--data", gl.data, "data CSV; the covariance is estimated from it");
  glasso->add_option("--scheme", gl.scheme, "scheme CSV for --data");
  glasso->add_option("--method", gl.method, "covariance for --data: ours or baseline")->capture_default_str();
  glasso->add_option("--lambda", gl.lambda, "fixed penalty");
  glasso->add_option("--select", gl.select, "penalty selection: ebic or stars");
  glasso->add_option("--n", gl.n, "sample size behind --cov (ebic)");
  glasso->add_option("--gamma", gl.gamma, "EBIC gamma")->capture_default_str();
  glasso->add_option("--subsamples", gl.subsamples, "StARS subsamples")->capture_default_str();
  glasso->add_option("--beta", gl.beta, "StARS instability threshold")->capture_default_str();
  glasso->add_option("--seed", gl.seed, "StARS subsampling seed")->capture_default_str();
  glasso->add_option("--path-length", gl.path_length, "penalty path points")->capture_default_str();
  glasso->add_option("--ratio", gl.ratio, "smallest/largest penalty on the path")->capture_default_str();
  glasso->add_option("--tol", gl.solver.tol, "sweep tolerance")->capture_default_str();
  glasso->add_option("--max-iter", gl.solver.max_iter, "maximum sweeps")->capture_default_str();
  glasso->add_option("--inner-tol", gl.solver.inner_tol, "inner lasso tolerance")->capture_default_str();
  glasso->add_option("--edge-zero-tol", gl.edge_zero_tol, "|theta| threshold for an edge")->capture_default_str();
  gl.estimator.attach(glasso);
  glasso->add_option("--out-dir", gl.out_dir, "output directory")->capture_default_str();

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("run-experiment", "Monte-Carlo structure recovery experiment");
  experiment->add_option("--config", ex.config, "JSON configuration");
  experiment->add_option("--seed", ex.seed, "experiment seed")->required();
  experiment->add_option("--out-dir", ex.out_dir, "output directory (overrides config)");
  experiment->add_option("--workers", ex.workers, "threads (0 = all cores)");
  experiment->add_option("--structure", ex.structure, "chain, random or hub");
  experiment->add_option("--p", ex.p, "number of variables");
  experiment->add_option("--n", ex.n, "sample size");
  experiment->add_option("--repetitions", ex.repetitions, "number of repetitions");
  experiment->add_option("--scheme", ex.scheme, "identical or decreasing");
  experiment->add_option("--a", ex.a, "lower bound");
  experiment->add_option("--b", ex.b, "upper bound");
  experiment->add_option("--b-last", ex.b_last, "last upper bound (decreasing)");
  experiment->add_option("--methods", ex.methods, "ours and/or baseline");
  experiment->add_option("--select", ex.select, "ebic or stars");

  DiagnoseArgs dg;
  auto* diagnose = app.add_subcommand("diagnose", "incoherence and condition constants of a ground truth");
  dg.graph.attach(diagnose);
  diagnose->add_option("--sigma", dg.sigma, "covariance CSV instead of a generated graph");
  diagnose->add_option("--seed", dg.seed, "seed for random graphs")->capture_default_str();
  diagnose->add_option("--out", dg.out, "JSON output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*estimate) return run_estimate(est);
    if (*glasso) return run_glasso(gl);
    if (*experiment) return run_experiment_command(ex);
    if (*diagnose) return run_diagnose(dg);
  } catch (const tg::ValidationError& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kInvalid;
  } catch (const tg::DomainError& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kInvalid;
  } catch (const tg::NumericalError& e) {
    fmt::print(std::cerr, "numerical failure: {}\n", e.what());
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "internal error: {}\n", e.what());
    return kInternal;
  }
  return kInternal;
}
