#include "truncgraph/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "truncgraph/errors.hpp"

namespace truncgraph {

std::string_view to_string(Method m) { return m == Method::ours ? "ours" : "baseline"; }

Method parse_method(std::string_view name) {
  if (name == "ours") return Method::ours;
  if (name == "baseline") return Method::baseline;
  throw ValidationError("unknown method '" + std::string(name) + "' (expected ours or baseline)");
}

std::string_view to_string(EdgeLabel l) {
  switch (l) {
    case EdgeLabel::true_edge: return "true-edge";
    case EdgeLabel::skip_one: return "skip-one";
    case EdgeLabel::other_false: return "other-false";
  }
  return "unknown";
}

double DetectionReport::mean_rate(EdgeLabel label) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rates) {
    if (r.label == label) {
      sum += r.rate;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double DetectionReport::mean_true_rate_between(std::size_t first, std::size_t last) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rates) {
    if (r.label == EdgeLabel::true_edge && r.k == r.j + 1 && r.j >= first && r.j < last) {
      sum += r.rate;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<EdgeSet::Edge> upper_tri_pairs(std::size_t p) {
  std::vector<EdgeSet::Edge> pairs;
  pairs.reserve(p * (p - 1) / 2);
  for (std::size_t k = 1; k < p; ++k) {
    for (std::size_t j = 0; j < k; ++j) pairs.emplace_back(j, k);
  }
  return pairs;
}

DetectionReport detection_rates(std::span<const EdgeSet> edge_sets, const GroundTruth& truth,
                                bool chain_labels, Method method) {
  if (edge_sets.empty()) throw ValidationError("detection_rates: no repetitions");
  const auto p = static_cast<std::size_t>(truth.sigma_star.rows());
  DetectionReport report;
  report.method = method;
  report.repetitions = edge_sets.size();
  for (const auto& [j, k] : upper_tri_pairs(p)) {
    PairRate r{j, k, EdgeLabel::other_false, 0.0};
    if (truth.edges.contains(j, k)) {
      r.label = EdgeLabel::true_edge;
    } else if (chain_labels && k == j + 2) {
      r.label = EdgeLabel::skip_one;
    }
    std::size_t hits = 0;
    for (const auto& e : edge_sets) hits += e.contains(j, k) ? 1 : 0;
    r.rate = static_cast<double>(hits) / static_cast<double>(edge_sets.size());
    report.rates.push_back(r);
  }
  return report;
}

CovarianceEstimate baseline_covariance(const ZeroInflatedMatrix& data) {
  const Eigen::MatrixXd& y = data.values();
  const Eigen::MatrixXd centered = y.rowwise() - y.colwise().mean();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(y.rows() - 1);
  for (Eigen::Index j = 0; j < cov.rows(); ++j) {
    if (!(cov(j, j) > 0.0)) {
      throw NumericalError("baseline covariance: column " + std::to_string(j + 1) +
                           " has zero variance");
    }
  }
  const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  CovarianceEstimate out;
  out.matrix = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.matrix.diagonal().setOnes();
  out.delta = 0.0;
  return out;
}

namespace {

struct KroneckerBlocks {
  std::vector<Eigen::Index> support;     // flattened ordered pairs j * p + k
  std::vector<Eigen::Index> complement;
  Eigen::MatrixXd gamma_ss_inv;
};

double gamma_entry(const Eigen::MatrixXd& sigma, Eigen::Index p, Eigen::Index e, Eigen::Index f) {
  return sigma(e / p, f / p) * sigma(e % p, f % p);
}

KroneckerBlocks kronecker_blocks(const GroundTruth& truth) {
  const Eigen::Index p = truth.sigma_star.rows();
  if (static_cast<std::size_t>(p) > kMaxDiagnosticDimension) {
    throw ValidationError("diagnostics: p = " + std::to_string(p) + " exceeds the supported " +
                          std::to_string(kMaxDiagnosticDimension));
  }
  KroneckerBlocks blocks;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const bool in_support = j == k || truth.edges.contains(static_cast<std::size_t>(j),
                                                             static_cast<std::size_t>(k));
      (in_support ? blocks.support : blocks.complement).push_back(j * p + k);
    }
  }
  const auto s = static_cast<Eigen::Index>(blocks.support.size());
  Eigen::MatrixXd gamma_ss(s, s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) {
      gamma_ss(a, b) = gamma_entry(truth.sigma_star, p, blocks.support[a], blocks.support[b]);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gamma_ss);
  if (!lu.isInvertible()) throw NumericalError("diagnostics: Gamma_SS is singular");
  blocks.gamma_ss_inv = lu.inverse();
  return blocks;
}

}  // namespace

double incoherence_alpha(const GroundTruth& truth) {
  const KroneckerBlocks blocks = kronecker_blocks(truth);
  if (blocks.complement.empty()) return 1.0;
  const Eigen::Index p = truth.sigma_star.rows();
  const auto s = static_cast<Eigen::Index>(blocks.support.size());
  Eigen::RowVectorXd row(s);
  double worst = 0.0;
  for (Eigen::Index e : blocks.complement) {
    for (Eigen::Index b = 0; b < s; ++b) {
      row(b) = gamma_entry(truth.sigma_star, p, e, blocks.support[b]);
    }
    worst = std::max(worst, (row * blocks.gamma_ss_inv).cwiseAbs().sum());
  }
  return 1.0 - worst;
}

TheoryConstants theory_constants(const GroundTruth& truth) {
  const KroneckerBlocks blocks = kronecker_blocks(truth);
  TheoryConstants c;
  const auto deg = truth.edges.degrees();
  c.max_degree = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  c.kappa_sigma = truth.sigma_star.cwiseAbs().rowwise().sum().maxCoeff();
  c.kappa_gamma = blocks.gamma_ss_inv.cwiseAbs().rowwise().sum().maxCoeff();
  return c;
}

}  // namespace truncgraph
