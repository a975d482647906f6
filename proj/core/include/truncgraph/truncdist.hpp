#pragma once

// Bivariate-marginal likelihood kernels for a pair of standardized Gaussian
// coordinates observed through a zero-inflating double truncation.
//
// For a pair (X_j, X_k) with unit variances and correlation sigma, an
// observation falls in one of four cells depending on which coordinate left
// its window [a, b] (and was reported as 0):
//
//   phi11(sigma, y_j, y_k)  both observed: the bivariate normal density
//   phi01(sigma, y_k)       X_j censored:  density of y_k times P(X_j outside | y_k)
//   phi10(sigma, y_j)       X_k censored:  mirror image of phi01
//   phi00(sigma)            both censored: probability mass of the outer region
//
// Together they form a probability density with respect to the mixed
// Dirac-at-zero plus Lebesgue measure; normalization_defect() measures how far
// the numerical kernels are from integrating to one.

#include <cstddef>
#include <span>
#include <vector>

namespace truncgraph {

/// Kernels reject |sigma| > 1 - kKernelBoundaryGap.
inline constexpr double kKernelBoundaryGap = 1e-4;

/// Per-variable truncation windows [lower_j, upper_j] on the standardized scale.
class TruncationScheme {
 public:
  /// Throws ValidationError unless both vectors have the same length p >= 2,
  /// every entry is finite and lower_j < upper_j.
  TruncationScheme(std::vector<double> lower, std::vector<double> upper);

  std::size_t dimension() const { return lower_.size(); }
  double lower(std::size_t j) const { return lower_.at(j); }
  double upper(std::size_t j) const { return upper_.at(j); }
  std::span<const double> lower() const { return lower_; }
  std::span<const double> upper() const { return upper_; }

  bool contains(std::size_t j, double value) const {
    return value >= lower_[j] && value <= upper_[j];
  }

  /// Probability that a standard normal coordinate j is censored,
  /// 1 - (F(b_j) - F(a_j)).
  double censoring_probability(std::size_t j) const;

  friend bool operator==(const TruncationScheme&, const TruncationScheme&) = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// The two windows relevant to a pair (j, k).
struct PairBounds {
  double lower_j;
  double upper_j;
  double lower_k;
  double upper_k;

  /// Throws ValidationError unless both windows are finite and nonempty.
  PairBounds(double aj, double bj, double ak, double bk);

  static PairBounds of(const TruncationScheme& scheme, std::size_t j, std::size_t k);

  /// Same windows with the roles of j and k exchanged.
  PairBounds swapped() const { return {lower_k, upper_k, lower_j, upper_j}; }
};

double std_normal_pdf(double x);

/// Standard normal c.d.f.; absolute error below 1e-15 on all finite inputs.
double std_normal_cdf(double x);

double phi11(double sigma, double y_j, double y_k);
double phi01(double sigma, double y_k, const PairBounds& bounds);
double phi10(double sigma, double y_j, const PairBounds& bounds);
double phi00(double sigma, const PairBounds& bounds);

/// log(phi01) computed without forming the density first; equal to
/// log(phi01(...)) but usable in the log-likelihood hot loop.
double log_phi01(double sigma, double y_k, const PairBounds& bounds);
double log_phi10(double sigma, double y_j, const PairBounds& bounds);

/// P(X > h, Y > k) for a standard bivariate normal with correlation rho.
double bivariate_normal_upper(double h, double k, double rho);

/// Probability of the rectangle [x_lo, x_hi] x [y_lo, y_hi] under the standard
/// bivariate normal with correlation sigma.
double bivariate_rectangle_prob(double sigma, double x_lo, double x_hi, double y_lo,
                                double y_hi);

/// |phi00 + int phi01 + int phi10 + iint phi11 - 1| where the integrals run
/// over the observation windows and are evaluated by adaptive quadrature of
/// the closed-form kernels.
double normalization_defect(double sigma, const PairBounds& bounds);

}  // namespace truncgraph
