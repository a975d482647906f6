#pragma once

// Monte-Carlo structure-recovery experiment: one fixed ground truth, many
// independent truncated samples, per-pair detection frequencies per method.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncgraph/diagnostics.hpp"
#include "truncgraph/glasso.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"

namespace truncgraph {

enum class SelectionKind { ebic, stars };
std::string_view to_string(SelectionKind k);
SelectionKind parse_selection_kind(std::string_view name);

struct SelectionConfig {
  SelectionKind kind = SelectionKind::stars;
  double gamma = kDefaultEbicGamma;
  std::size_t subsamples = 20;
  double beta = 0.05;
};

inline constexpr std::size_t kDefaultPathLength = 20;
inline constexpr double kDefaultPathRatio = 0.05;

struct SolverConfig {
  GlassoOptions glasso;
  std::size_t path_length = kDefaultPathLength;
  double ratio = kDefaultPathRatio;
  double edge_zero_tol = kDefaultEdgeZeroTol;
};

struct EstimatorConfig {
  PairEstimatorConfig pair;
  double eps_psd = kDefaultPsdFloor;
};

struct ExperimentConfig {
  GraphSpec graph;
  bool graph_seed_set = false;  // otherwise derived from `seed`
  SchemeSpec scheme;
  std::size_t n = 500;
  std::size_t repetitions = 50;
  std::vector<Method> methods{Method::ours, Method::baseline};
  SelectionConfig selection;
  SolverConfig solver;
  EstimatorConfig estimator;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";
  unsigned workers = 1;

  void validate() const;
  bool runs(Method m) const;
};

/// Omitted fields keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);

/// Stream-separated 64-bit seed from (base, repetition, stream) via seed_seq.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t repetition, std::uint64_t stream);

struct MethodOutcome {
  EdgeSet edges;
  double lambda = 0.0;
  std::size_t path_index = 0;
  int iterations = 0;
  double kkt_residual = 0.0;
};

struct RepetitionOutcome {
  std::size_t index = 0;
  std::optional<std::string> error;  // set when the repetition failed
  std::vector<double> zero_rates;
  std::size_t degenerate_pairs = 0;
  std::size_t tied_pairs = 0;
  bool psd_repaired = false;
  std::vector<std::pair<Method, MethodOutcome>> methods;
};

struct ExperimentResult {
  ExperimentConfig config;
  GroundTruth truth;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<RepetitionOutcome> repetitions;  // ordered by index
  std::vector<DetectionReport> reports;        // one per run method

  std::size_t failed_count() const;
  const DetectionReport* report(Method m) const;
};

/// Fresh ground truth for the configured graph (seeded from config when the
/// graph seed was not set explicitly).
GroundTruth experiment_truth(const ExperimentConfig& config);

/// Runs every repetition; failures are kept in the result rather than
/// thrown. Throws NumericalError when no repetition succeeds.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Columns j,k,label then one rate_<method> per run method; 1-based indices
/// in upper.tri order.
void write_detection_csv(std::ostream& out, const ExperimentResult& result);

/// Resolved configuration, module defaults, library version, ground-truth
/// summary and per-repetition records. Contains no timestamps.
nlohmann::json experiment_metadata(const ExperimentResult& result);

/// All module defaults keyed by name, as recorded in metadata.
nlohmann::json default_constants();

}  // namespace truncgraph
