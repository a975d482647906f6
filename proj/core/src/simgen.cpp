#include "truncgraph/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "truncgraph/errors.hpp"

namespace truncgraph {

std::string_view to_string(GraphStructure s) {
  switch (s) {
    case GraphStructure::chain: return "chain";
    case GraphStructure::random: return "random";
    case GraphStructure::hub: return "hub";
  }
  return "unknown";
}

GraphStructure parse_graph_structure(std::string_view name) {
  if (name == "chain" || name == "band") return GraphStructure::chain;
  if (name == "random") return GraphStructure::random;
  if (name == "hub") return GraphStructure::hub;
  throw ValidationError("unknown graph structure '" + std::string(name) + "'");
}

std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::identical: return "identical";
    case SchemeKind::decreasing: return "decreasing";
    case SchemeKind::custom: return "custom";
  }
  return "unknown";
}

SchemeKind parse_scheme_kind(std::string_view name) {
  if (name == "identical") return SchemeKind::identical;
  if (name == "decreasing") return SchemeKind::decreasing;
  if (name == "custom") return SchemeKind::custom;
  throw ValidationError("unknown truncation scheme kind '" + std::string(name) + "'");
}

void GraphSpec::validate() const {
  if (p < 2) throw ValidationError("graph spec: p must be at least 2");
  if (!(strength != 0.0) || !std::isfinite(strength)) {
    throw ValidationError("graph spec: strength must be finite and nonzero");
  }
  if (structure == GraphStructure::random && !(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw ValidationError("graph spec: edge_prob must lie in (0, 1]");
  }
  if (structure == GraphStructure::hub && (groups == 0 || p % groups != 0)) {
    throw ValidationError("graph spec: groups (" + std::to_string(groups) +
                          ") must divide p (" + std::to_string(p) + ")");
  }
}

Eigen::MatrixXd make_adjacency(const GraphSpec& spec) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.p);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  switch (spec.structure) {
    case GraphStructure::chain:
      for (Eigen::Index i = 0; i + 1 < p; ++i) A(i, i + 1) = A(i + 1, i) = 1.0;
      break;
    case GraphStructure::random: {
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Eigen::Index k = 1; k < p; ++k) {
        for (Eigen::Index j = 0; j < k; ++j) {
          if (unif(rng) < spec.edge_prob) A(j, k) = A(k, j) = 1.0;
        }
      }
      break;
    }
    case GraphStructure::hub: {
      const auto size = static_cast<Eigen::Index>(spec.p / spec.groups);
      for (Eigen::Index g = 0; g < static_cast<Eigen::Index>(spec.groups); ++g) {
        const Eigen::Index hub = g * size;
        for (Eigen::Index i = hub + 1; i < hub + size; ++i) A(hub, i) = A(i, hub) = 1.0;
      }
      break;
    }
  }
  return A;
}

GroundTruth make_ground_truth(const GraphSpec& spec) {
  const Eigen::MatrixXd A = make_adjacency(spec);
  const Eigen::Index p = A.rows();
  const Eigen::MatrixXd scaled = spec.strength * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double shift = kPrecisionEigenFloor - eig.eigenvalues().minCoeff();
  const Eigen::MatrixXd theta_raw = scaled + shift * Eigen::MatrixXd::Identity(p, p);

  Eigen::LLT<Eigen::MatrixXd> llt(theta_raw);
  if (llt.info() != Eigen::Success) throw NumericalError("ground truth: precision is not positive definite");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();

  GroundTruth truth;
  truth.sigma_star = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  truth.sigma_star = 0.5 * (truth.sigma_star + truth.sigma_star.transpose()).eval();
  truth.sigma_star.diagonal().setOnes();
  truth.theta_star = sd.asDiagonal() * theta_raw * sd.asDiagonal();
  truth.edges = edge_set(A, 0.5);
  const auto deg = truth.edges.degrees();
  truth.max_degree = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  return truth;
}

GroundTruth ground_truth_from_covariance(const Eigen::MatrixXd& sigma_star) {
  const Eigen::Index p = sigma_star.rows();
  if (p < 2 || sigma_star.cols() != p) throw ValidationError("ground truth: covariance must be square, p >= 2");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_star);
  if (llt.info() != Eigen::Success) throw NumericalError("ground truth: covariance is not positive definite");
  GroundTruth truth;
  truth.sigma_star = sigma_star;
  truth.theta_star = llt.solve(Eigen::MatrixXd::Identity(p, p));
  truth.edges = edge_set(truth.theta_star, 1e-12);
  const auto deg = truth.edges.degrees();
  truth.max_degree = *std::max_element(deg.begin(), deg.end());
  return truth;
}

Eigen::MatrixXd sample_latent(const GroundTruth& truth, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_latent: n must be at least 1");
  Eigen::LLT<Eigen::MatrixXd> llt(truth.sigma_star);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sample_latent: covariance has no Cholesky factor");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::Index p = L.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
  }
  return Z * L.transpose();
}

ZeroInflatedMatrix truncate(const Eigen::MatrixXd& latent, const TruncationScheme& scheme) {
  if (static_cast<std::size_t>(latent.cols()) != scheme.dimension()) {
    throw ValidationError("truncate: latent has " + std::to_string(latent.cols()) +
                          " columns but scheme has " + std::to_string(scheme.dimension()));
  }
  Eigen::MatrixXd out = latent;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      if (!scheme.contains(static_cast<std::size_t>(j), out(i, j))) out(i, j) = 0.0;
    }
  }
  return ZeroInflatedMatrix(std::move(out));
}

TruncationScheme identical_scheme(std::size_t p, double a, double b) {
  return TruncationScheme(std::vector<double>(p, a), std::vector<double>(p, b));
}

TruncationScheme decreasing_scheme(std::size_t p, double a, double b_first, double b_last) {
  std::vector<double> upper(p);
  for (std::size_t j = 0; j < p; ++j) {
    upper[j] = p == 1 ? b_first
                      : b_first + (b_last - b_first) * static_cast<double>(j) /
                                      static_cast<double>(p - 1);
  }
  return TruncationScheme(std::vector<double>(p, a), std::move(upper));
}

TruncationScheme make_scheme(const SchemeSpec& spec, std::size_t p) {
  switch (spec.kind) {
    case SchemeKind::identical: return identical_scheme(p, spec.a, spec.b);
    case SchemeKind::decreasing: return decreasing_scheme(p, spec.a, spec.b, spec.b_last);
    case SchemeKind::custom:
      if (spec.lower.size() != p || spec.upper.size() != p) {
        throw ValidationError("custom truncation scheme: expected " + std::to_string(p) +
                              " bounds per side, got " + std::to_string(spec.lower.size()) +
                              " and " + std::to_string(spec.upper.size()));
      }
      return TruncationScheme(spec.lower, spec.upper);
  }
  throw ValidationError("unknown truncation scheme kind");
}

}  // namespace truncgraph
