#pragma once

// Structure-recovery metrics, the "graphical lasso on truncated data"
// baseline, and ground-truth quantities governing sparsistency (incoherence
// alpha, maximum degree, kappa_Sigma, kappa_Gamma).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "truncgraph/glasso.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"

namespace truncgraph {

enum class Method { ours, baseline };
std::string_view to_string(Method m);
Method parse_method(std::string_view name);

enum class EdgeLabel { true_edge, skip_one, other_false };
std::string_view to_string(EdgeLabel l);

struct PairRate {
  std::size_t j = 0;  // 0-based, j < k
  std::size_t k = 0;
  EdgeLabel label = EdgeLabel::other_false;
  double rate = 0.0;
};

/// Per-pair selection frequencies, ordered like R's upper.tri unfolding:
/// (1,2), (1,3), (2,3), (1,4), ...
struct DetectionReport {
  Method method = Method::ours;
  std::size_t repetitions = 0;
  std::vector<PairRate> rates;

  double mean_rate(EdgeLabel label) const;
  /// Mean true-edge rate restricted to chain edges (i, i+1) with
  /// first <= i < last (0-based).
  double mean_true_rate_between(std::size_t first, std::size_t last) const;
};

/// Pairs (j, k), j < k, in upper.tri order.
std::vector<EdgeSet::Edge> upper_tri_pairs(std::size_t p);

/// Selection frequency of every pair across the repetitions' edge sets.
/// Pairs at distance two along a chain are labeled skip_one when
/// chain_labels is set.
DetectionReport detection_rates(std::span<const EdgeSet> edge_sets, const GroundTruth& truth,
                                bool chain_labels, Method method = Method::ours);

/// Empirical covariance of the observed zero-inflated data (zeros included),
/// rescaled to unit diagonal. Throws NumericalError on a constant column.
CovarianceEstimate baseline_covariance(const ZeroInflatedMatrix& data);

inline constexpr std::size_t kMaxDiagnosticDimension = 60;

/// 1 - max_{e in S^c} || Gamma_eS (Gamma_SS)^{-1} ||_1 with Gamma = Sigma (x) Sigma
/// and S the support of Theta* (ordered pairs, diagonal included). Values
/// <= 0 mean the incoherence condition fails. Empty S^c gives 1.
double incoherence_alpha(const GroundTruth& truth);

struct TheoryConstants {
  std::size_t max_degree = 0;  // off-diagonal nonzeros per row of Theta*
  double kappa_sigma = 0.0;    // max row l1 norm of Sigma*
  double kappa_gamma = 0.0;    // l_inf operator norm of (Gamma_SS)^{-1}
};

TheoryConstants theory_constants(const GroundTruth& truth);

}  // namespace truncgraph
