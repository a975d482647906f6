#include "truncgraph/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "truncgraph/errors.hpp"
#include "truncgraph/parallel.hpp"

namespace truncgraph {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void check_covariance_input(const Eigen::MatrixXd& S) {
  if (S.rows() == 0 || S.rows() != S.cols()) {
    throw DomainError("graphical_lasso: input must be a nonempty square matrix");
  }
  if (!S.allFinite()) throw DomainError("graphical_lasso: input has non-finite entries");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("graphical_lasso: input matrix is not symmetric");
  }
  if ((S.diagonal().array() <= 0.0).any()) {
    throw DomainError("graphical_lasso: input diagonal must be positive");
  }
}

double max_off_diagonal(const Eigen::MatrixXd& S) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < S.cols(); ++k) {
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
      if (j != k) m = std::max(m, std::abs(S(j, k)));
    }
  }
  return m;
}

bool is_positive_definite(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

double log_det_spd(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

PrecisionEstimate graphical_lasso(const Eigen::MatrixXd& S, double lambda,
                                  const GlassoOptions& options) {
  check_covariance_input(S);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("graphical_lasso: lambda must be finite and nonnegative");
  }
  const Eigen::Index p = S.rows();
  PrecisionEstimate out;
  out.lambda = lambda;

  if (p == 1) {
    out.theta = S.cwiseInverse();
    out.w = S;
    return out;
  }

  // Starting point: W = S when S is positive definite. Otherwise shrink the
  // off-diagonal part towards diag(S) by at most lambda per entry, which keeps
  // the start dual-feasible.
  Eigen::MatrixXd W = S;
  if (!is_positive_definite(S)) {
    if (lambda == 0.0) {
      throw NumericalError("graphical_lasso: lambda = 0 requires a positive definite input");
    }
    const Eigen::MatrixXd D = S.diagonal().asDiagonal();
    const double shrink = std::min(1.0, lambda / max_off_diagonal(S));
    W = (1.0 - shrink) * S + shrink * D;
    if (!is_positive_definite(W)) W = D;
  }

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);  // B.col(j): lasso coefficients of block j
  Eigen::VectorXd g(p);
  bool converged = false;
  int sweep = 0;
  for (sweep = 1; sweep <= options.max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      auto beta = B.col(j);
      g.noalias() = W * beta;
      // Cyclic coordinate descent on 1/2 b'W11 b - s12'b + lambda |b|_1.
      for (int inner = 0; inner < 10000; ++inner) {
        double delta = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const double old = beta(k);
          const double wkk = W(k, k);
          const double updated = soft_threshold(S(k, j) - (g(k) - wkk * old), lambda) / wkk;
          if (updated != old) {
            const double diff = updated - old;
            g.noalias() += W.col(k) * diff;
            beta(k) = updated;
            delta = std::max(delta, std::abs(diff));
          }
        }
        if (delta < options.inner_tol) break;
      }
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j) continue;
        max_change = std::max(max_change, std::abs(g(k) - W(k, j)));
        W(k, j) = g(k);
        W(j, k) = g(k);
      }
    }
    if (options.record_objective) out.dual_objective.push_back(log_det_spd(W));
    if (max_change <= options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("graphical_lasso: no convergence after " +
                           std::to_string(options.max_iter) + " sweeps (lambda = " +
                           std::to_string(lambda) + ")");
  }

  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double dot = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) dot += W(k, j) * B(k, j);
    }
    const double tjj = 1.0 / (W(j, j) - dot);
    theta(j, j) = tjj;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) theta(k, j) = -B(k, j) * tjj;
    }
  }
  theta = 0.5 * (theta + theta.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(theta);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("graphical_lasso: precision estimate is not positive definite");
  }
  const Eigen::MatrixXd theta_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));

  out.theta = std::move(theta);
  out.w = std::move(W);
  out.iterations = sweep;
  out.kkt_residual = kkt_residual(out.theta, theta_inv, S, lambda);
  return out;
}

double penalized_loglik(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& S, double lambda) {
  const double logdet = log_det_spd(theta);
  if (!std::isfinite(logdet)) return logdet;
  const double off_l1 = theta.cwiseAbs().sum() - theta.diagonal().cwiseAbs().sum();
  return logdet - (theta.cwiseProduct(S)).sum() - lambda * off_l1;
}

double kkt_residual(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& w,
                    const Eigen::MatrixXd& S, double lambda) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < S.cols(); ++k) {
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
      if (j == k) continue;
      const double gap = w(j, k) - S(j, k);
      const double t = theta(j, k);
      const double violation = t != 0.0 ? std::abs(gap - lambda * (t > 0.0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(gap) - lambda);
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

void EdgeSet::insert(std::size_t j, std::size_t k) {
  if (j == k) throw ValidationError("edge set: self-loops are not allowed");
  if (j >= dimension_ || k >= dimension_) {
    throw ValidationError("edge set: vertex index out of range");
  }
  edges_.insert({std::min(j, k), std::max(j, k)});
}

bool EdgeSet::contains(std::size_t j, std::size_t k) const {
  return edges_.count({std::min(j, k), std::max(j, k)}) > 0;
}

std::vector<std::size_t> EdgeSet::degrees() const {
  std::vector<std::size_t> deg(dimension_, 0);
  for (const auto& [j, k] : edges_) {
    ++deg[j];
    ++deg[k];
  }
  return deg;
}

EdgeSet edge_set(const Eigen::MatrixXd& theta, double zero_tol) {
  const auto p = static_cast<std::size_t>(theta.rows());
  EdgeSet edges(p);
  for (std::size_t k = 1; k < p; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (std::abs(theta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) > zero_tol) {
        edges.insert(j, k);
      }
    }
  }
  return edges;
}

EdgeSet edge_set(const PrecisionEstimate& estimate, double zero_tol) {
  return edge_set(estimate.theta, zero_tol);
}

std::vector<double> lambda_path(const Eigen::MatrixXd& S, std::size_t n_points, double ratio) {
  if (n_points < 2) throw ValidationError("lambda_path: need at least 2 points");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("lambda_path: ratio must lie in (0, 1)");
  const double top = max_off_diagonal(S);
  if (!(top > 0.0)) throw ValidationError("lambda_path: matrix has no nonzero off-diagonal entry");
  std::vector<double> path(n_points);
  const double log_ratio = std::log(ratio);
  for (std::size_t i = 0; i < n_points; ++i) {
    path[i] = top * std::exp(log_ratio * static_cast<double>(i) / static_cast<double>(n_points - 1));
  }
  path.front() = top;
  path.back() = top * ratio;
  return path;
}

Selection ebic_select(const Eigen::MatrixXd& S, std::size_t n, std::span<const double> path,
                      double gamma, const GlassoOptions& options) {
  if (path.empty()) throw ValidationError("ebic_select: empty penalty path");
  if (n < 1) throw ValidationError("ebic_select: sample size must be positive");
  const double log_n = std::log(static_cast<double>(n));
  const double log_p = std::log(static_cast<double>(S.rows()));

  Selection best;
  bool have = false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    PrecisionEstimate est = graphical_lasso(S, path[i], options);
    const double edges = static_cast<double>(edge_set(est).size());
    const double fit = log_det_spd(est.theta) - est.theta.cwiseProduct(S).sum();
    const double score = -static_cast<double>(n) * fit + edges * log_n + 4.0 * gamma * edges * log_p;
    best.scores.push_back(score);
    bool take = !have;
    if (have) {
      const double incumbent = best.scores[best.index];
      const double slack = 1e-12 * std::max(1.0, std::abs(incumbent));
      take = score < incumbent - slack || (score <= incumbent + slack && path[i] > best.lambda);
    }
    if (take) {
      best.index = i;
      best.lambda = path[i];
      best.estimate = std::move(est);
      have = true;
    }
  }
  return best;
}

std::size_t stars_subsample_size(std::size_t n) {
  return static_cast<std::size_t>(std::floor(10.0 * std::sqrt(static_cast<double>(n))));
}

double total_instability(std::span<const EdgeSet> edge_sets, std::size_t dimension) {
  if (edge_sets.empty() || dimension < 2) return 0.0;
  const double count = static_cast<double>(edge_sets.size());
  double sum = 0.0;
  for (std::size_t k = 1; k < dimension; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      double hits = 0.0;
      for (const auto& e : edge_sets) hits += e.contains(j, k) ? 1.0 : 0.0;
      const double xi = hits / count;
      sum += 2.0 * xi * (1.0 - xi);
    }
  }
  return sum / (static_cast<double>(dimension * (dimension - 1)) / 2.0);
}

Selection stars_select(const CovarianceBuilder& builder, std::size_t n,
                       std::span<const double> path, const StarsOptions& stars,
                       std::uint64_t seed, const GlassoOptions& options) {
  if (path.empty()) throw ValidationError("stars_select: empty penalty path");
  if (stars.subsamples < 2) throw ValidationError("stars_select: need at least 2 subsamples");
  const std::size_t b = stars_subsample_size(n);
  if (b >= n) {
    throw ValidationError("stars_select: subsample size " + std::to_string(b) +
                          " is not below the sample size " + std::to_string(n));
  }

  // Subsamples are drawn up front from one stream so the result does not
  // depend on how the solves are scheduled.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> subsets(stars.subsamples);
  std::vector<std::size_t> perm(n);
  for (auto& subset : subsets) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    subset.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(b));
    std::sort(subset.begin(), subset.end());
  }

  // Sparsest first.
  std::vector<std::size_t> order(path.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return path[a] > path[c]; });

  std::vector<std::vector<EdgeSet>> selected(path.size(), std::vector<EdgeSet>(subsets.size()));
  parallel_for(subsets.size(), stars.workers, [&](std::size_t s) {
    const Eigen::MatrixXd S = builder(subsets[s]);
    for (std::size_t l = 0; l < path.size(); ++l) {
      selected[l][s] = edge_set(graphical_lasso(S, path[l], options));
    }
  });
  const std::size_t dimension = selected.front().front().dimension();

  Selection out;
  out.scores.assign(path.size(), 0.0);
  double running = 0.0;
  std::size_t chosen = order.front();
  for (std::size_t idx : order) {
    running = std::max(running, total_instability(selected[idx], dimension));
    out.scores[idx] = running;
    if (running <= stars.beta) chosen = idx;
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  out.index = chosen;
  out.lambda = path[chosen];
  out.estimate = graphical_lasso(builder(all), out.lambda, options);
  return out;
}

}  // namespace truncgraph
