#pragma once

// Step 1 of the two-step graph estimator: each off-diagonal covariance entry
// is estimated separately by maximizing the bivariate marginal log-likelihood
// of the zero-inflated pair (Y_j, Y_k) over sigma.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "truncgraph/truncdist.hpp"

namespace truncgraph {

/// n x p observed matrix on the standardized scale. An entry equal to 0 means
/// the latent coordinate fell outside its window; every nonzero entry lies
/// inside the window of its column.
class ZeroInflatedMatrix {
 public:
  /// Throws ValidationError if n < 2 or p < 2 or an entry is not finite.
  explicit ZeroInflatedMatrix(Eigen::MatrixXd values);

  /// Additionally checks every nonzero entry against the scheme and reports
  /// the first offending (row, column), 1-based.
  ZeroInflatedMatrix(Eigen::MatrixXd values, const TruncationScheme& scheme);

  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

  /// Throws ValidationError if dimensions disagree or a nonzero entry lies
  /// outside its column's window.
  void validate(const TruncationScheme& scheme) const;

  /// Fraction of zero entries in column j.
  double zero_rate(std::size_t j) const;

  /// The subsample formed by the given rows, in the given order.
  ZeroInflatedMatrix select_rows(const std::vector<std::size_t>& rows) const;

 private:
  Eigen::MatrixXd values_;
};

/// Sufficient decomposition of one pair's sample by zero pattern. Bucket
/// "ab" holds rows where column j is censored (a = 0) or observed (a = 1),
/// and likewise b for column k.
struct PairBuckets {
  std::size_t n00 = 0;
  std::size_t n01 = 0;
  std::size_t n10 = 0;
  std::size_t n11 = 0;
  // Sums of y_j^2, y_k^2 and y_j * y_k over the fully observed rows.
  double s_jj = 0.0;
  double s_kk = 0.0;
  double s_jk = 0.0;
  std::vector<double> obs01;  // y_k values of rows with y_j censored
  std::vector<double> obs10;  // y_j values of rows with y_k censored

  std::size_t total() const { return n00 + n01 + n10 + n11; }
  bool informative() const { return n01 + n10 + n11 > 0; }
};

PairBuckets bucketize(const ZeroInflatedMatrix& data, std::size_t j, std::size_t k);

inline constexpr double kDefaultSearchMargin = 1e-3;

/// Log-likelihood of the pair sample at correlation sigma. Throws DomainError
/// when |sigma| > 1 - margin.
double pair_loglik(double sigma, const PairBuckets& buckets, const PairBounds& bounds,
                   double margin = kDefaultSearchMargin);

struct PairEstimatorConfig {
  double delta = kDefaultSearchMargin;  // search interval is [-1 + delta, 1 - delta]
  int grid_points = 41;
  double tol_sigma = 1e-6;
};

struct PairEstimate {
  double sigma = 0.0;
  double loglik = 0.0;
  bool degenerate = false;  // no informative bucket; sigma reported as 0
  bool tie = false;         // two separated maxima with equal objective
  int local_maxima = 0;     // local maxima seen on the coarse grid
};

/// Multi-start maximizer: scan an equispaced grid, then refine every grid
/// local maximum with a bounded Brent search inside its neighbouring cells.
/// Deterministic for fixed inputs.
PairEstimate estimate_pair_sigma(const PairBuckets& buckets, const PairBounds& bounds,
                                 const PairEstimatorConfig& config = {});

struct PairReport {
  std::size_t j = 0;
  std::size_t k = 0;
  PairEstimate estimate;
};

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;
  double delta = kDefaultSearchMargin;
  std::vector<PairReport> pairs;  // empty for estimates not built pairwise

  std::size_t degenerate_count() const;
  std::size_t tie_count() const;
};

/// Unit-diagonal matrix whose (j, k) entry is estimate_pair_sigma on the
/// (j, k) buckets. Pairs are independent and may be spread over `workers`
/// threads (0 = hardware concurrency); the result does not depend on it.
CovarianceEstimate estimate_covariance(const ZeroInflatedMatrix& data,
                                       const TruncationScheme& scheme,
                                       const PairEstimatorConfig& config = {},
                                       unsigned workers = 1);

inline constexpr double kDefaultPsdFloor = 1e-3;

/// Nearest-correlation style repair: clip eigenvalues below eps, rebuild and
/// rescale to unit diagonal. Inputs whose smallest eigenvalue is already at
/// least eps are returned unchanged.
CovarianceEstimate psd_repair(const CovarianceEstimate& estimate,
                              double eps = kDefaultPsdFloor);

}  // namespace truncgraph
