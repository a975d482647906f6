#pragma once

// Step 2: sparse precision estimation by the graphical lasso,
//
//   maximize  log det(Theta) - trace(Theta S) - lambda * sum_{j != k} |Theta_jk|
//
// solved by blockwise coordinate descent on the covariance W = Theta^{-1}.
// Only off-diagonal entries are penalized, so diag(W) = diag(S).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace truncgraph {

struct GlassoOptions {
  double tol = 1e-5;         // max elementwise change of W over one sweep
  int max_iter = 200;        // sweeps
  double inner_tol = 1e-7;   // coordinate-descent tolerance of each lasso block
  bool record_objective = false;
};

struct PrecisionEstimate {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd w;
  double lambda = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  // log det(W) after every sweep when GlassoOptions::record_objective is set.
  std::vector<double> dual_objective;
};

/// Throws DomainError if S is not square and symmetric with positive
/// diagonal, or if lambda < 0; NumericalError if lambda = 0 and S is not
/// positive definite; ConvergenceError after max_iter sweeps.
PrecisionEstimate graphical_lasso(const Eigen::MatrixXd& S, double lambda,
                                  const GlassoOptions& options = {});

/// log det(Theta) - trace(Theta S) - lambda * ||Theta||_{1,off}; -inf when
/// Theta is not positive definite.
double penalized_loglik(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& S, double lambda);

/// Largest violation of the stationarity conditions W - S = lambda * sign(Theta)
/// on the support and |W - S| <= lambda off it, over off-diagonal entries.
double kkt_residual(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& w,
                    const Eigen::MatrixXd& S, double lambda);

/// Undirected edges as (j, k) with j < k, 0-based.
class EdgeSet {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  EdgeSet() = default;
  explicit EdgeSet(std::size_t dimension) : dimension_(dimension) {}

  /// Inserts {j, k} in canonical order. Throws ValidationError on self-loops
  /// or indices outside the dimension.
  void insert(std::size_t j, std::size_t k);
  bool contains(std::size_t j, std::size_t k) const;

  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  std::size_t dimension() const { return dimension_; }
  auto begin() const { return edges_.begin(); }
  auto end() const { return edges_.end(); }

  /// Number of edges incident to each vertex.
  std::vector<std::size_t> degrees() const;

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;

 private:
  std::size_t dimension_ = 0;
  std::set<Edge> edges_;
};

inline constexpr double kDefaultEdgeZeroTol = 1e-8;

EdgeSet edge_set(const Eigen::MatrixXd& theta, double zero_tol = kDefaultEdgeZeroTol);
EdgeSet edge_set(const PrecisionEstimate& estimate, double zero_tol = kDefaultEdgeZeroTol);

/// Log-spaced penalties from max_{j != k} |S_jk| down to ratio times that value.
std::vector<double> lambda_path(const Eigen::MatrixXd& S, std::size_t n_points, double ratio);

struct Selection {
  std::size_t index = 0;  // position of the chosen penalty on the path
  double lambda = 0.0;
  PrecisionEstimate estimate;
  std::vector<double> scores;  // EBIC values, or monotonized instability for StARS
};

inline constexpr double kDefaultEbicGamma = 0.5;

/// Minimizes EBIC(lambda) = -n (log det Theta - tr(Theta S)) + |E| log n
/// + 4 gamma |E| log p over the path; ties go to the largest penalty.
Selection ebic_select(const Eigen::MatrixXd& S, std::size_t n, std::span<const double> path,
                      double gamma = kDefaultEbicGamma, const GlassoOptions& options = {});

/// Builds the covariance input of the solver from a subset of sample rows.
using CovarianceBuilder = std::function<Eigen::MatrixXd(const std::vector<std::size_t>& rows)>;

struct StarsOptions {
  std::size_t subsamples = 20;
  double beta = 0.05;
  unsigned workers = 1;
};

/// floor(10 * sqrt(n)), the StARS subsample size.
std::size_t stars_subsample_size(std::size_t n);

/// 2 * xi * (1 - xi) averaged over all p(p-1)/2 pairs, where xi is the
/// fraction of edge sets containing the pair.
double total_instability(std::span<const EdgeSet> edge_sets, std::size_t dimension);

/// Stability selection: draws `subsamples` row subsets of size
/// stars_subsample_size(n) without replacement, solves the path on each, and
/// picks the densest penalty whose monotonized instability is <= beta. The
/// returned estimate is the full-sample solve (builder called with all rows).
/// Throws ValidationError if the subsample size is not below n.
Selection stars_select(const CovarianceBuilder& builder, std::size_t n,
                       std::span<const double> path, const StarsOptions& stars,
                       std::uint64_t seed, const GlassoOptions& options = {});

}  // namespace truncgraph
