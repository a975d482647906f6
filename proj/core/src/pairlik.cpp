#include "truncgraph/pairlik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "truncgraph/errors.hpp"
#include "truncgraph/parallel.hpp"

namespace truncgraph {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

std::string cell(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1);
}

// Brent's bounded minimizer (golden section with parabolic steps). Returns
// the abscissa; `value` receives f at that point.
template <class F>
double brent_minimize(F&& f, double lo, double hi, double tol, double& value) {
  constexpr double kGolden = 0.3819660112501051;
  constexpr double kSqrtEps = 1.4901161193847656e-08;
  double a = lo, b = hi;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = kSqrtEps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = mid >= x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid ? a : b) - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      (u >= x ? a : b) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  value = fx;
  return x;
}

}  // namespace

ZeroInflatedMatrix::ZeroInflatedMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 2 || values_.cols() < 2) {
    throw ValidationError("zero-inflated matrix needs at least 2 rows and 2 columns, got " +
                          std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
  }
  for (Eigen::Index c = 0; c < values_.cols(); ++c) {
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
      if (!std::isfinite(values_(r, c))) {
        throw ValidationError("non-finite value at " + cell(r, c));
      }
    }
  }
}

ZeroInflatedMatrix::ZeroInflatedMatrix(Eigen::MatrixXd values, const TruncationScheme& scheme)
    : ZeroInflatedMatrix(std::move(values)) {
  validate(scheme);
}

void ZeroInflatedMatrix::validate(const TruncationScheme& scheme) const {
  if (scheme.dimension() != cols()) {
    throw ValidationError("data has " + std::to_string(cols()) + " columns but scheme has " +
                          std::to_string(scheme.dimension()) + " variables");
  }
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      const double y = values_(r, c);
      if (y != 0.0 && !scheme.contains(static_cast<std::size_t>(c), y)) {
        throw ValidationError("value " + std::to_string(y) + " at " + cell(r, c) +
                              " lies outside its truncation window [" +
                              std::to_string(scheme.lower(c)) + ", " +
                              std::to_string(scheme.upper(c)) + "]");
      }
    }
  }
}

double ZeroInflatedMatrix::zero_rate(std::size_t j) const {
  return static_cast<double>((values_.col(static_cast<Eigen::Index>(j)).array() == 0.0).count()) /
         static_cast<double>(values_.rows());
}

ZeroInflatedMatrix ZeroInflatedMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), values_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
  }
  return ZeroInflatedMatrix(std::move(sub));
}

PairBuckets bucketize(const ZeroInflatedMatrix& data, std::size_t j, std::size_t k) {
  if (j == k) throw ValidationError("bucketize: pair indices must differ");
  if (j >= data.cols() || k >= data.cols()) {
    throw ValidationError("bucketize: index out of range for " + std::to_string(data.cols()) +
                          " columns");
  }
  PairBuckets b;
  const auto& v = data.values();
  const auto cj = static_cast<Eigen::Index>(j);
  const auto ck = static_cast<Eigen::Index>(k);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double yj = v(i, cj);
    const double yk = v(i, ck);
    if (yj == 0.0 && yk == 0.0) {
      ++b.n00;
    } else if (yj == 0.0) {
      ++b.n01;
      b.obs01.push_back(yk);
    } else if (yk == 0.0) {
      ++b.n10;
      b.obs10.push_back(yj);
    } else {
      ++b.n11;
      b.s_jj += yj * yj;
      b.s_kk += yk * yk;
      b.s_jk += yj * yk;
    }
  }
  return b;
}

double pair_loglik(double sigma, const PairBuckets& buckets, const PairBounds& bounds,
                   double margin) {
  if (!(std::abs(sigma) <= 1.0 - margin)) {
    throw DomainError("pair_loglik: |sigma| must not exceed 1 - " + std::to_string(margin) +
                      ", got " + std::to_string(sigma));
  }
  double total = 0.0;
  if (buckets.n00 > 0) {
    total += static_cast<double>(buckets.n00) * std::log(phi00(sigma, bounds));
  }
  for (double yk : buckets.obs01) total += log_phi01(sigma, yk, bounds);
  for (double yj : buckets.obs10) total += log_phi10(sigma, yj, bounds);
  if (buckets.n11 > 0) {
    const double n11 = static_cast<double>(buckets.n11);
    const double one_minus = 1.0 - sigma * sigma;
    total += -n11 * kLogTwoPi - 0.5 * n11 * std::log(one_minus) -
             (buckets.s_jj - 2.0 * sigma * buckets.s_jk + buckets.s_kk) / (2.0 * one_minus);
  }
  return total;
}

PairEstimate estimate_pair_sigma(const PairBuckets& buckets, const PairBounds& bounds,
                                 const PairEstimatorConfig& config) {
  if (buckets.total() == 0) throw ValidationError("estimate_pair_sigma: empty sample");
  if (config.grid_points < 3) throw ValidationError("estimate_pair_sigma: need at least 3 grid points");
  if (!(config.delta >= kKernelBoundaryGap && config.delta < 1.0)) {
    throw ValidationError("estimate_pair_sigma: delta must lie in [1e-4, 1)");
  }
  if (!(config.tol_sigma > 0.0)) throw ValidationError("estimate_pair_sigma: tol_sigma must be positive");

  PairEstimate out;
  if (!buckets.informative()) {
    out.degenerate = true;
    out.loglik = pair_loglik(0.0, buckets, bounds, config.delta);
    return out;
  }

  const double edge = 1.0 - config.delta;
  const int g = config.grid_points;
  auto objective = [&](double s) {
    const double v = pair_loglik(s, buckets, bounds, config.delta);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };

  std::vector<double> grid(static_cast<std::size_t>(g));
  std::vector<double> values(grid.size());
  for (int i = 0; i < g; ++i) {
    grid[i] = i == g - 1 ? edge : -edge + 2.0 * edge * i / (g - 1);
    values[i] = objective(grid[i]);
  }

  struct Candidate {
    double sigma;
    double value;
  };
  std::vector<Candidate> candidates;
  for (int i = 0; i < g; ++i) {
    if (!std::isfinite(values[i])) continue;
    const bool left_ok = i == 0 || values[i] >= values[i - 1];
    const bool right_ok = i == g - 1 || values[i] >= values[i + 1];
    if (!left_ok || !right_ok) continue;
    ++out.local_maxima;
    const double lo = grid[std::max(i - 1, 0)];
    const double hi = grid[std::min(i + 1, g - 1)];
    double neg = 0.0;
    const double s = brent_minimize([&](double t) { return -objective(t); }, lo, hi,
                                    config.tol_sigma, neg);
    if (-neg >= values[i]) {
      candidates.push_back({s, -neg});
    } else {
      candidates.push_back({grid[i], values[i]});
    }
  }
  if (candidates.empty()) {
    throw NumericalError("estimate_pair_sigma: log-likelihood is not finite on the search grid");
  }

  auto best = std::max_element(candidates.begin(), candidates.end(),
                               [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
  const double tie_tol = 1e-9 * std::max(1.0, std::abs(best->value));
  Candidate chosen = *best;
  for (const auto& c : candidates) {
    if (std::abs(c.sigma - best->sigma) <= 10.0 * config.tol_sigma) continue;
    if (c.value >= best->value - tie_tol) {
      out.tie = true;
      if (std::abs(c.sigma) < std::abs(chosen.sigma)) chosen = c;
    }
  }
  out.sigma = chosen.sigma;
  out.loglik = chosen.value;
  return out;
}

std::size_t CovarianceEstimate::degenerate_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const PairReport& r) { return r.estimate.degenerate; }));
}

std::size_t CovarianceEstimate::tie_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const PairReport& r) { return r.estimate.tie; }));
}

CovarianceEstimate estimate_covariance(const ZeroInflatedMatrix& data,
                                       const TruncationScheme& scheme,
                                       const PairEstimatorConfig& config, unsigned workers) {
  data.validate(scheme);
  const std::size_t p = data.cols();

  CovarianceEstimate out;
  out.delta = config.delta;
  out.pairs.reserve(p * (p - 1) / 2);
  for (std::size_t k = 1; k < p; ++k) {
    for (std::size_t j = 0; j < k; ++j) out.pairs.push_back({j, k, {}});
  }

  parallel_for(out.pairs.size(), workers, [&](std::size_t idx) {
    auto& report = out.pairs[idx];
    const PairBuckets buckets = bucketize(data, report.j, report.k);
    report.estimate = estimate_pair_sigma(buckets, PairBounds::of(scheme, report.j, report.k), config);
  });

  out.matrix = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (const auto& r : out.pairs) {
    const auto j = static_cast<Eigen::Index>(r.j);
    const auto k = static_cast<Eigen::Index>(r.k);
    out.matrix(j, k) = out.matrix(k, j) = r.estimate.sigma;
  }
  return out;
}

CovarianceEstimate psd_repair(const CovarianceEstimate& estimate, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("psd_repair: eps must lie in (0, 1)");
  const Eigen::MatrixXd sym = 0.5 * (estimate.matrix + estimate.matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("psd_repair: eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() >= eps) return estimate;

  // Clip at a floor t >= eps chosen so that, after rescaling to unit
  // diagonal, the smallest eigenvalue (>= t / max diag) is still >= eps.
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  Eigen::MatrixXd rebuilt;
  double floor = eps;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
    rebuilt = vecs * clipped.asDiagonal() * vecs.transpose();
    const double max_diag = rebuilt.diagonal().maxCoeff();
    if (floor / max_diag >= eps) break;
    floor = eps * max_diag * (1.0 + 1e-12);
  }
  const Eigen::VectorXd inv_sd = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = inv_sd.asDiagonal() * rebuilt * inv_sd.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose());
  scaled.diagonal().setOnes();

  CovarianceEstimate out = estimate;
  out.matrix = std::move(scaled);
  return out;
}

}  // namespace truncgraph
