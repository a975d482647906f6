#pragma once

// Ground-truth graphs, latent Gaussian sampling and the truncation operator
// used by the simulation studies.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "truncgraph/glasso.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/truncdist.hpp"

namespace truncgraph {

enum class GraphStructure { chain, random, hub };

std::string_view to_string(GraphStructure s);
GraphStructure parse_graph_structure(std::string_view name);

inline constexpr double kDefaultStrength = 0.3;
inline constexpr double kPrecisionEigenFloor = 0.1;

struct GraphSpec {
  GraphStructure structure = GraphStructure::chain;
  std::size_t p = 10;
  double edge_prob = 0.02;  // random only
  std::size_t groups = 1;   // hub only
  double strength = kDefaultStrength;
  std::uint64_t seed = 0;   // random only

  /// Throws ValidationError on p < 2, edge_prob outside (0, 1], strength 0,
  /// or (hub) groups not dividing p.
  void validate() const;
};

struct GroundTruth {
  Eigen::MatrixXd theta_star;  // precision matrix, inverse of sigma_star
  Eigen::MatrixXd sigma_star;  // unit-diagonal covariance
  EdgeSet edges;
  std::size_t max_degree = 0;
};

/// Adjacency A per structure; Theta_raw = c I + strength A with c chosen so
/// that the smallest eigenvalue is kPrecisionEigenFloor; Sigma* is the
/// correlation rescaling of Theta_raw^{-1} and Theta* = D Theta_raw D its
/// exact inverse (so zeros stay exact zeros).
GroundTruth make_ground_truth(const GraphSpec& spec);

/// Symmetric 0/1 adjacency matrix of the spec's graph.
Eigen::MatrixXd make_adjacency(const GraphSpec& spec);

/// Ground truth for an arbitrary unit-diagonal covariance.
GroundTruth ground_truth_from_covariance(const Eigen::MatrixXd& sigma_star);

/// n x p rows drawn i.i.d. from N(0, Sigma*). Throws NumericalError when
/// Sigma* has no Cholesky factor.
Eigen::MatrixXd sample_latent(const GroundTruth& truth, std::size_t n, std::uint64_t seed);

/// Entrywise: keep x_ij when a_j <= x_ij <= b_j, else report 0.
ZeroInflatedMatrix truncate(const Eigen::MatrixXd& latent, const TruncationScheme& scheme);

enum class SchemeKind { identical, decreasing, custom };

std::string_view to_string(SchemeKind k);
SchemeKind parse_scheme_kind(std::string_view name);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::identical;
  double a = -0.5;     // identical and decreasing
  double b = 2.0;      // identical; first upper bound for decreasing
  double b_last = 0.5; // decreasing: last upper bound
  std::vector<double> lower;  // custom
  std::vector<double> upper;  // custom
};

TruncationScheme identical_scheme(std::size_t p, double a, double b);

/// Lower bound a for every variable; upper bounds linearly spaced from
/// b_first (variable 1) to b_last (variable p).
TruncationScheme decreasing_scheme(std::size_t p, double a, double b_first, double b_last);

TruncationScheme make_scheme(const SchemeSpec& spec, std::size_t p);

}  // namespace truncgraph
