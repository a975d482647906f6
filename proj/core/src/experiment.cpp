#include "truncgraph/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <new>
#include <ostream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "truncgraph/errors.hpp"
#include "truncgraph/parallel.hpp"
#include "truncgraph/version.hpp"

namespace truncgraph {

using nlohmann::json;

std::string_view to_string(SelectionKind k) { return k == SelectionKind::ebic ? "ebic" : "stars"; }

SelectionKind parse_selection_kind(std::string_view name) {
  if (name == "ebic") return SelectionKind::ebic;
  if (name == "stars") return SelectionKind::stars;
  throw ValidationError("unknown selection '" + std::string(name) + "' (expected ebic or stars)");
}

void ExperimentConfig::validate() const {
  graph.validate();
  if (n < 2) throw ValidationError("config: n must be at least 2");
  if (repetitions < 1) throw ValidationError("config: repetitions must be at least 1");
  if (methods.empty()) throw ValidationError("config: at least one method is required");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) {
    throw ValidationError("config: duplicate method");
  }
  if (selection.kind == SelectionKind::ebic && !(selection.gamma >= 0.0)) {
    throw ValidationError("config: selection.gamma must be non-negative");
  }
  if (selection.kind == SelectionKind::stars) {
    if (selection.subsamples < 2) throw ValidationError("config: selection.subsamples must be at least 2");
    if (!(selection.beta > 0.0 && selection.beta < 0.5)) {
      throw ValidationError("config: selection.beta must lie in (0, 0.5)");
    }
    if (stars_subsample_size(n) >= n) {
      throw ValidationError(fmt::format("config: StARS subsample size {} is not below n = {}",
                                        stars_subsample_size(n), n));
    }
  }
  if (!(solver.glasso.tol > 0.0) || !(solver.glasso.inner_tol > 0.0) || solver.glasso.max_iter < 1) {
    throw ValidationError("config: solver tolerances must be positive and max_iter >= 1");
  }
  if (solver.path_length < 2) throw ValidationError("config: solver.path_length must be at least 2");
  if (!(solver.ratio > 0.0 && solver.ratio < 1.0)) {
    throw ValidationError("config: solver.ratio must lie in (0, 1)");
  }
  if (!(solver.edge_zero_tol >= 0.0)) throw ValidationError("config: solver.edge_zero_tol must be >= 0");
  const auto& pe = estimator.pair;
  if (!(pe.delta >= kKernelBoundaryGap && pe.delta < 1.0)) {
    throw ValidationError(fmt::format("config: estimator.delta must lie in [{}, 1)", kKernelBoundaryGap));
  }
  if (pe.grid_points < 3) throw ValidationError("config: estimator.grid_points must be at least 3");
  if (!(pe.tol_sigma > 0.0)) throw ValidationError("config: estimator.tol_sigma must be positive");
  if (!(estimator.eps_psd > 0.0 && estimator.eps_psd < 1.0)) {
    throw ValidationError("config: estimator.eps_psd must lie in (0, 1)");
  }
  (void)make_scheme(scheme, graph.p);
}

bool ExperimentConfig::runs(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

namespace {

// Reads the keys of one JSON object, rejecting unknown ones.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ValidationError("config: '" + label() + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + qualified(key) + "' has the wrong type");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + qualified(key) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
void non_negative(ObjectReader& r, const std::string& key, T& out) {
  long long raw = static_cast<long long>(out);
  r.get(key, raw);
  if (raw < 0) throw ValidationError("config: '" + r.qualified(key) + "' must be non-negative");
  out = static_cast<T>(raw);
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  ObjectReader root(doc, "");

  if (const json* g = root.child("graph")) {
    ObjectReader r(*g, "graph");
    std::string structure(to_string(c.graph.structure));
    r.get("structure", structure);
    c.graph.structure = parse_graph_structure(structure);
    non_negative(r, "p", c.graph.p);
    r.get("edge_prob", c.graph.edge_prob);
    non_negative(r, "groups", c.graph.groups);
    r.get("strength", c.graph.strength);
    if (r.has("seed")) {
      r.get("seed", c.graph.seed);
      c.graph_seed_set = true;
    }
    r.child("seed");
    r.finish();
  }
  if (const json* s = root.child("scheme")) {
    ObjectReader r(*s, "scheme");
    std::string kind(to_string(c.scheme.kind));
    r.get("kind", kind);
    c.scheme.kind = parse_scheme_kind(kind);
    r.get("a", c.scheme.a);
    r.get("b", c.scheme.b);
    r.get("b_last", c.scheme.b_last);
    r.get("lower", c.scheme.lower);
    r.get("upper", c.scheme.upper);
    r.finish();
  }
  non_negative(root, "n", c.n);
  non_negative(root, "repetitions", c.repetitions);
  if (const json* m = root.child("methods")) {
    if (!m->is_array()) throw ValidationError("config: 'methods' must be an array");
    c.methods.clear();
    for (const auto& name : *m) {
      if (!name.is_string()) throw ValidationError("config: 'methods' entries must be strings");
      c.methods.push_back(parse_method(name.get<std::string>()));
    }
  }
  if (const json* s = root.child("selection")) {
    ObjectReader r(*s, "selection");
    std::string kind(to_string(c.selection.kind));
    r.get("kind", kind);
    c.selection.kind = parse_selection_kind(kind);
    r.get("gamma", c.selection.gamma);
    non_negative(r, "subsamples", c.selection.subsamples);
    r.get("beta", c.selection.beta);
    r.finish();
  }
  if (const json* s = root.child("solver")) {
    ObjectReader r(*s, "solver");
    r.get("tol", c.solver.glasso.tol);
    r.get("max_iter", c.solver.glasso.max_iter);
    r.get("inner_tol", c.solver.glasso.inner_tol);
    non_negative(r, "path_length", c.solver.path_length);
    r.get("ratio", c.solver.ratio);
    r.get("edge_zero_tol", c.solver.edge_zero_tol);
    r.finish();
  }
  if (const json* e = root.child("estimator")) {
    ObjectReader r(*e, "estimator");
    r.get("delta", c.estimator.pair.delta);
    r.get("grid_points", c.estimator.pair.grid_points);
    r.get("tol_sigma", c.estimator.pair.tol_sigma);
    r.get("eps_psd", c.estimator.eps_psd);
    r.finish();
  }
  root.get("seed", c.seed);
  std::string output_dir = c.output_dir.string();
  root.get("output_dir", output_dir);
  c.output_dir = output_dir;
  non_negative(root, "workers", c.workers);
  root.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json graph = {{"structure", to_string(c.graph.structure)},
                {"p", c.graph.p},
                {"edge_prob", c.graph.edge_prob},
                {"groups", c.graph.groups},
                {"strength", c.graph.strength}};
  if (c.graph_seed_set) graph["seed"] = c.graph.seed;
  json scheme = {{"kind", to_string(c.scheme.kind)}};
  if (c.scheme.kind == SchemeKind::custom) {
    scheme["lower"] = c.scheme.lower;
    scheme["upper"] = c.scheme.upper;
  } else {
    scheme["a"] = c.scheme.a;
    scheme["b"] = c.scheme.b;
    if (c.scheme.kind == SchemeKind::decreasing) scheme["b_last"] = c.scheme.b_last;
  }
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  return {{"graph", graph},
          {"scheme", scheme},
          {"n", c.n},
          {"repetitions", c.repetitions},
          {"methods", methods},
          {"selection",
           {{"kind", to_string(c.selection.kind)},
            {"gamma", c.selection.gamma},
            {"subsamples", c.selection.subsamples},
            {"beta", c.selection.beta}}},
          {"solver",
           {{"tol", c.solver.glasso.tol},
            {"max_iter", c.solver.glasso.max_iter},
            {"inner_tol", c.solver.glasso.inner_tol},
            {"path_length", c.solver.path_length},
            {"ratio", c.solver.ratio},
            {"edge_zero_tol", c.solver.edge_zero_tol}}},
          {"estimator",
           {{"delta", c.estimator.pair.delta},
            {"grid_points", c.estimator.pair.grid_points},
            {"tol_sigma", c.estimator.pair.tol_sigma},
            {"eps_psd", c.estimator.eps_psd}}},
          {"seed", c.seed}};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t repetition, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(repetition), static_cast<std::uint32_t>(repetition >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::size_t ExperimentResult::failed_count() const {
  return static_cast<std::size_t>(std::count_if(repetitions.begin(), repetitions.end(),
                                                [](const auto& r) { return r.error.has_value(); }));
}

const DetectionReport* ExperimentResult::report(Method m) const {
  for (const auto& r : reports) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

GroundTruth experiment_truth(const ExperimentConfig& config) {
  GraphSpec spec = config.graph;
  if (!config.graph_seed_set) spec.seed = derive_seed(config.seed, 0, 0);
  return make_ground_truth(spec);
}

namespace {

enum Stream : std::uint64_t { kLatentStream = 1, kSubsampleStream = 2 };

RepetitionOutcome run_repetition(const ExperimentConfig& config, const GroundTruth& truth,
                                 const TruncationScheme& scheme, std::size_t r) {
  RepetitionOutcome out;
  out.index = r;
  const std::uint64_t rep_seed = static_cast<std::uint64_t>(r);
  const ZeroInflatedMatrix data =
      truncate(sample_latent(truth, config.n, derive_seed(config.seed, rep_seed, kLatentStream)), scheme);
  for (std::size_t j = 0; j < data.cols(); ++j) out.zero_rates.push_back(data.zero_rate(j));

  for (Method method : config.methods) {
    Eigen::MatrixXd full;
    bool have_full = false;
    auto compute = [&](const ZeroInflatedMatrix& sample, bool record) -> Eigen::MatrixXd {
      if (method == Method::baseline) return baseline_covariance(sample).matrix;
      const CovarianceEstimate raw = estimate_covariance(sample, scheme, config.estimator.pair, 1);
      CovarianceEstimate repaired = psd_repair(raw, config.estimator.eps_psd);
      if (record) {
        out.degenerate_pairs = raw.degenerate_count();
        out.tied_pairs = raw.tie_count();
        out.psd_repaired = repaired.matrix != raw.matrix;
      }
      return std::move(repaired.matrix);
    };
    const CovarianceBuilder builder = [&](const std::vector<std::size_t>& rows) -> Eigen::MatrixXd {
      if (rows.size() == data.rows()) {
        if (!have_full) {
          full = compute(data, true);
          have_full = true;
        }
        return full;
      }
      return compute(data.select_rows(rows), false);
    };
    std::vector<std::size_t> all(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Eigen::MatrixXd S = builder(all);
    const std::vector<double> path = lambda_path(S, config.solver.path_length, config.solver.ratio);

    Selection sel;
    if (config.selection.kind == SelectionKind::ebic) {
      sel = ebic_select(S, config.n, path, config.selection.gamma, config.solver.glasso);
    } else {
      const StarsOptions stars{config.selection.subsamples, config.selection.beta, 1};
      sel = stars_select(builder, config.n, path, stars,
                         derive_seed(config.seed, rep_seed, kSubsampleStream), config.solver.glasso);
    }
    MethodOutcome mo;
    mo.edges = edge_set(sel.estimate, config.solver.edge_zero_tol);
    mo.lambda = sel.lambda;
    mo.path_index = sel.index;
    mo.iterations = sel.estimate.iterations;
    mo.kkt_residual = sel.estimate.kkt_residual;
    out.methods.emplace_back(method, std::move(mo));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.truth = experiment_truth(config);
  const TruncationScheme scheme = make_scheme(config.scheme, config.graph.p);
  result.lower.assign(scheme.lower().begin(), scheme.lower().end());
  result.upper.assign(scheme.upper().begin(), scheme.upper().end());

  result.repetitions.resize(config.repetitions);
  parallel_for(config.repetitions, config.workers, [&](std::size_t r) {
    try {
      result.repetitions[r] = run_repetition(config, result.truth, scheme, r);
    } catch (const std::bad_alloc&) {
      throw;
    } catch (const std::exception& e) {
      RepetitionOutcome failed;
      failed.index = r;
      failed.error = e.what();
      result.repetitions[r] = std::move(failed);
    }
  });

  if (result.failed_count() == result.repetitions.size()) {
    throw NumericalError("run_experiment: every repetition failed; first error: " +
                         *result.repetitions.front().error);
  }
  const bool chain = config.graph.structure == GraphStructure::chain;
  for (Method m : config.methods) {
    std::vector<EdgeSet> sets;
    for (const auto& rep : result.repetitions) {
      if (rep.error) continue;
      for (const auto& [method, outcome] : rep.methods) {
        if (method == m) sets.push_back(outcome.edges);
      }
    }
    result.reports.push_back(detection_rates(sets, result.truth, chain, m));
  }
  return result;
}

void write_detection_csv(std::ostream& out, const ExperimentResult& result) {
  std::vector<const DetectionReport*> columns;
  out << "j,k,label";
  for (Method m : {Method::ours, Method::baseline}) {
    if (const DetectionReport* r = result.report(m)) {
      columns.push_back(r);
      out << ",rate_" << to_string(m);
    }
  }
  out << '\n';
  const std::size_t rows = columns.front()->rates.size();
  for (std::size_t i = 0; i < rows; ++i) {
    const PairRate& pr = columns.front()->rates[i];
    out << fmt::format("{},{},{}", pr.j + 1, pr.k + 1, to_string(pr.label));
    for (const DetectionReport* r : columns) out << fmt::format(",{}", r->rates[i].rate);
    out << '\n';
  }
}

json default_constants() {
  const PairEstimatorConfig pair;
  const GlassoOptions glasso;
  const StarsOptions stars;
  return {
      {"kernel_boundary_gap", kKernelBoundaryGap},
      {"search_margin_delta", pair.delta},
      {"grid_points", pair.grid_points},
      {"tol_sigma", pair.tol_sigma},
      {"degenerate_pair_rule", "sigma = 0, flagged"},
      {"tie_rule", "smaller |sigma|, flagged"},
      {"censoring_code", "an observed value of exactly 0 is read as censored"},
      {"rectangle_probability", "bivariate normal CDF (Drezner-Wesolowsky / Genz), inclusion-exclusion"},
      {"phi00_rule", "1 - P_j - P_k + R(sigma)"},
      {"normal_cdf", "0.5 * erfc(-x / sqrt(2))"},
      {"eps_psd", kDefaultPsdFloor},
      {"psd_repair", "eigenvalue clipping then unit-diagonal rescaling"},
      {"glasso_tol", glasso.tol},
      {"glasso_max_iter", glasso.max_iter},
      {"glasso_inner_tol", glasso.inner_tol},
      {"glasso_penalty", "off-diagonal entries only"},
      {"edge_zero_tol", kDefaultEdgeZeroTol},
      {"lambda_path", "geometric from max |S_jk| down to ratio * max"},
      {"path_length", kDefaultPathLength},
      {"path_ratio", kDefaultPathRatio},
      {"ebic_gamma", kDefaultEbicGamma},
      {"ebic_tie_rule", "largest penalty"},
      {"stars_subsamples", stars.subsamples},
      {"stars_beta", stars.beta},
      {"stars_subsample_size", "floor(10 * sqrt(n))"},
      {"graph_strength", kDefaultStrength},
      {"precision_eigen_floor", kPrecisionEigenFloor},
      {"covariance_scaling", "unit diagonal"},
      {"incoherence_empty_complement", 1.0},
      {"diagnostic_max_dimension", kMaxDiagnosticDimension},
      {"rng", "mt19937_64"},
      {"seed_derivation", "seed_seq(seed_lo, seed_hi, rep_lo, rep_hi, stream); 0 truth, 1 latent, 2 subsamples"},
  };
}

json experiment_metadata(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  const GroundTruth& truth = result.truth;

  json edges = json::array();
  for (const auto& [j, k] : truth.edges) edges.push_back({j + 1, k + 1});
  json expected = json::array();
  for (std::size_t j = 0; j < result.lower.size(); ++j) {
    expected.push_back(1.0 - (std_normal_cdf(result.upper[j]) - std_normal_cdf(result.lower[j])));
  }

  json reps = json::array();
  std::vector<double> censoring(result.lower.size(), 0.0);
  std::size_t ok = 0;
  for (const auto& rep : result.repetitions) {
    json entry = {{"index", rep.index}};
    if (rep.error) {
      entry["status"] = "failed";
      entry["error"] = *rep.error;
      reps.push_back(entry);
      continue;
    }
    ++ok;
    for (std::size_t j = 0; j < censoring.size(); ++j) censoring[j] += rep.zero_rates[j];
    entry["status"] = "ok";
    if (c.runs(Method::ours)) {
      entry["degenerate_pairs"] = rep.degenerate_pairs;
      entry["tied_pairs"] = rep.tied_pairs;
      entry["psd_repaired"] = rep.psd_repaired;
    }
    for (const auto& [method, mo] : rep.methods) {
      entry[std::string(to_string(method))] = {{"lambda", mo.lambda},
                                               {"path_index", mo.path_index},
                                               {"edges", mo.edges.size()},
                                               {"iterations", mo.iterations},
                                               {"kkt_residual", mo.kkt_residual}};
    }
    reps.push_back(entry);
  }
  for (double& v : censoring) v /= static_cast<double>(ok);

  json summary = {{"successful_repetitions", ok}, {"failed_repetitions", result.failed_count()}};
  for (const auto& report : result.reports) {
    json s = {{"mean_true_edge", report.mean_rate(EdgeLabel::true_edge)},
              {"mean_other_false", report.mean_rate(EdgeLabel::other_false)}};
    if (c.graph.structure == GraphStructure::chain) {
      s["mean_skip_one"] = report.mean_rate(EdgeLabel::skip_one);
    }
    summary[std::string(to_string(report.method))] = s;
  }

  json graph_seed = c.graph_seed_set ? c.graph.seed : derive_seed(c.seed, 0, 0);
  return {{"library", {{"name", "truncgraph"}, {"version", std::string(kVersion)}}},
          {"config", to_json(c)},
          {"defaults", default_constants()},
          {"truth",
           {{"graph_seed", graph_seed},
            {"edges", edges},
            {"edge_count", truth.edges.size()},
            {"max_degree", truth.max_degree}}},
          {"scheme", {{"lower", result.lower}, {"upper", result.upper}, {"expected_censoring", expected}}},
          {"empirical_censoring", censoring},
          {"summary", summary},
          {"repetitions", reps}};
}

}  // namespace truncgraph
