#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "truncgraph/errors.hpp"
#include "truncgraph/glasso.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"

namespace tg = truncgraph;
using tg::testing::Gen;

namespace {

// Proximal gradient ascent on log det T - tr(T S) - lambda * sum_{j != k} |T_jk|
// with step halving to stay positive definite and increase the objective.
Eigen::MatrixXd prox_gradient_oracle(const Eigen::MatrixXd& S, double lambda) {
  const Eigen::Index p = S.rows();
  Eigen::MatrixXd T = S.diagonal().cwiseInverse().asDiagonal();
  auto prox = [&](Eigen::MatrixXd M, double t) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) {
        if (i == j) continue;
        const double v = M(i, j);
        M(i, j) = std::copysign(std::max(std::abs(v) - t * lambda, 0.0), v);
      }
    return M;
  };
  double step = 1.0;
  double obj = tg::penalized_loglik(T, S, lambda);
  for (int it = 0; it < 200000; ++it) {
    const Eigen::MatrixXd grad = T.inverse() - S;
    Eigen::MatrixXd next;
    double next_obj = -INFINITY;
    for (double t = step; t > 1e-12; t *= 0.5) {
      next = prox(T + t * grad, t);
      next = 0.5 * (next + next.transpose()).eval();
      next_obj = tg::penalized_loglik(next, S, lambda);
      if (next_obj >= obj) break;
    }
    const double change = (next - T).cwiseAbs().maxCoeff();
    T = next;
    obj = next_obj;
    if (change < 1e-14) break;
  }
  return T;
}

Eigen::MatrixXd chain_theta(Eigen::Index p, double off) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(p, p) * 2.0;
  for (Eigen::Index i = 0; i + 1 < p; ++i) t(i, i + 1) = t(i + 1, i) = off;
  return t;
}

tg::ZeroInflatedMatrix chain_data(std::size_t p, std::size_t n, std::uint64_t seed) {
  tg::GraphSpec spec;
  spec.p = p;
  const auto truth = tg::make_ground_truth(spec);
  return tg::truncate(tg::sample_latent(truth, n, seed), tg::identical_scheme(p, -0.5, 2.0));
}

}  // namespace

TEST(Glasso, ScalarCase) {
  const auto est = tg::graphical_lasso(Eigen::MatrixXd::Constant(1, 1, 2.5), 0.3);
  EXPECT_DOUBLE_EQ(est.theta(0, 0), 0.4);
}

TEST(Glasso, ZeroPenaltyIsInverse) {
  Gen gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd S = gen.spd(5);
    const auto est = tg::graphical_lasso(S, 0.0);
    EXPECT_LE((est.theta - S.inverse()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Glasso, TwoByTwoClosedForm) {
  Eigen::Matrix2d S;
  S << 1.0, 0.6, 0.6, 1.0;
  const auto est = tg::graphical_lasso(S, 0.2);
  Eigen::Matrix2d w;
  w << 1.0, 0.4, 0.4, 1.0;
  const Eigen::Matrix2d theta = w.inverse();
  EXPECT_NEAR(est.w(0, 1), 0.4, 1e-8);
  EXPECT_LE((est.theta - theta).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(est.theta(0, 0), 1.0 / 0.84, 1e-8);
  EXPECT_NEAR(est.theta(0, 1), -0.4 / 0.84, 1e-8);
  EXPECT_LE((prox_gradient_oracle(S, 0.2) - theta).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(tg::edge_set(est).size(), 1u);
  EXPECT_TRUE(tg::edge_set(est).contains(0, 1));
}

TEST(Glasso, SoftThresholdKill) {
  Eigen::Matrix2d S;
  S << 1.0, 0.15, 0.15, 2.0;
  const auto est = tg::graphical_lasso(S, 0.2);
  EXPECT_EQ(est.theta(0, 1), 0.0);
  EXPECT_NEAR(est.theta(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(est.theta(1, 1), 0.5, 1e-12);
}

TEST(Glasso, MatchesProximalOracle) {
  Gen gen(32);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd S = gen.correlation(4);
    const double lambda = gen.uniform(0.02, 0.2);
    tg::GlassoOptions tight;
    tight.tol = 1e-10;
    tight.inner_tol = 1e-12;
    const auto est = tg::graphical_lasso(S, lambda, tight);
    EXPECT_LE((est.theta - prox_gradient_oracle(S, lambda)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Glasso, CertificatesOnRandomSolves) {
  Gen gen(33);
  tg::GlassoOptions opts;
  opts.record_objective = true;
  // Inexact block solves may lower log det W by a hair; the slack scales
  // with the inner tolerance.
  const double slack = 10.0 * opts.inner_tol;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index p = 3 + static_cast<Eigen::Index>(gen.index(10));
    const Eigen::MatrixXd S = gen.correlation(p);
    const double lambda = gen.uniform(0.01, 0.5);
    const auto est = tg::graphical_lasso(S, lambda, opts);
    EXPECT_LE(est.kkt_residual, 10 * opts.tol);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(est.theta).info(), Eigen::Success);
    EXPECT_TRUE(est.w.diagonal() == S.diagonal());
    EXPECT_TRUE(est.theta.isApprox(est.theta.transpose(), 0.0));
    for (std::size_t i = 1; i < est.dual_objective.size(); ++i) {
      EXPECT_GE(est.dual_objective[i], est.dual_objective[i - 1] - slack);
    }
  }
}

TEST(Glasso, DualObjectiveMonotoneWithExactBlocks) {
  Gen gen(37);
  tg::GlassoOptions opts;
  opts.record_objective = true;
  opts.inner_tol = 1e-12;
  opts.tol = 1e-9;
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::MatrixXd S = gen.correlation(3 + static_cast<Eigen::Index>(gen.index(10)));
    const auto est = tg::graphical_lasso(S, gen.uniform(0.01, 0.5), opts);
    for (std::size_t i = 1; i < est.dual_objective.size(); ++i) {
      EXPECT_GE(est.dual_objective[i], est.dual_objective[i - 1] - 1e-12);
    }
  }
}

TEST(Glasso, PermutationEquivariance) {
  Gen gen(34);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd S = gen.correlation(6);
    const auto perm = gen.permutation(6);
    tg::GlassoOptions tight;
    tight.tol = 1e-10;
    tight.inner_tol = 1e-12;
    const auto a = tg::graphical_lasso(S, 0.1, tight);
    const auto b = tg::graphical_lasso(tg::testing::permute_symmetric(S, perm), 0.1, tight);
    EXPECT_LE((tg::testing::permute_symmetric(a.theta, perm) - b.theta).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Glasso, NonPositiveDefiniteInput) {
  Eigen::Matrix3d S;
  S << 1.0, 0.9, -0.6, 0.9, 1.0, 0.7, -0.6, 0.7, 1.0;
  EXPECT_THROW(tg::graphical_lasso(S, 0.0), tg::NumericalError);
  const auto est = tg::graphical_lasso(S, 0.3);
  EXPECT_LE(est.kkt_residual, 1e-4);
}

TEST(Glasso, InputValidation) {
  Eigen::Matrix2d asym;
  asym << 1.0, 0.2, 0.3, 1.0;
  EXPECT_THROW(tg::graphical_lasso(asym, 0.1), tg::DomainError);
  Eigen::Matrix2d negdiag;
  negdiag << -1.0, 0.0, 0.0, 1.0;
  EXPECT_THROW(tg::graphical_lasso(negdiag, 0.1), tg::DomainError);
  EXPECT_THROW(tg::graphical_lasso(Eigen::Matrix2d::Identity(), -0.1), tg::DomainError);
}

TEST(Glasso, ConvergenceFailureReported) {
  Gen gen(35);
  tg::GlassoOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  EXPECT_THROW(tg::graphical_lasso(gen.correlation(8), 0.01, opts), tg::ConvergenceError);
}

TEST(EdgeSet, FromPrecision) {
  EXPECT_TRUE(tg::edge_set(Eigen::MatrixXd::Identity(4, 4)).empty());
  const auto chain = tg::edge_set(chain_theta(6, 0.4));
  EXPECT_EQ(chain.size(), 5u);
  for (std::size_t i = 0; i + 1 < 6; ++i) EXPECT_TRUE(chain.contains(i + 1, i));
  tg::EdgeSet e(3);
  EXPECT_THROW(e.insert(1, 1), tg::ValidationError);
  EXPECT_THROW(e.insert(0, 3), tg::ValidationError);
}

TEST(LambdaPath, GeometricSpacing) {
  Eigen::Matrix3d S;
  S << 1.0, 0.6, -0.2, 0.6, 1.0, 0.1, -0.2, 0.1, 1.0;
  const auto path = tg::lambda_path(S, 3, 0.01);
  ASSERT_EQ(path.size(), 3u);
  EXPECT_DOUBLE_EQ(path[0], 0.6);
  EXPECT_NEAR(path[1], 0.06, 1e-15);
  EXPECT_NEAR(path[2], 0.006, 1e-15);
  const auto longer = tg::lambda_path(S, 15, 0.05);
  for (std::size_t i = 1; i < longer.size(); ++i) EXPECT_LT(longer[i], longer[i - 1]);
  EXPECT_TRUE(tg::edge_set(tg::graphical_lasso(S, path[0])).empty());
  EXPECT_THROW(tg::lambda_path(Eigen::Matrix3d::Identity(), 5, 0.1), tg::ValidationError);
}

TEST(Ebic, TrivialCases) {
  Gen gen(36);
  const Eigen::MatrixXd S = gen.correlation(5);
  const std::vector<double> one{0.2};
  EXPECT_EQ(tg::ebic_select(S, 100, one).lambda, 0.2);

  const std::vector<double> path{0.5, 0.3, 0.1};
  const auto sel = tg::ebic_select(Eigen::MatrixXd::Identity(5, 5), 100, path);
  EXPECT_EQ(sel.index, 0u);
  EXPECT_TRUE(tg::edge_set(sel.estimate).empty());
}

TEST(Ebic, RecoversChain) {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = chain_data(10, 2000, 500 + seed);
    const auto scheme = tg::identical_scheme(10, -0.5, 2.0);
    const Eigen::MatrixXd S = tg::psd_repair(tg::estimate_covariance(data, scheme)).matrix;
    const auto sel = tg::ebic_select(S, 2000, tg::lambda_path(S, 20, 0.05));
    tg::GraphSpec spec;
    spec.p = 10;
    exact += tg::edge_set(sel.estimate) == tg::make_ground_truth(spec).edges ? 1 : 0;
  }
  EXPECT_GE(exact, 8);
}

TEST(Stars, InstabilityExtremes) {
  tg::EdgeSet a(3), b(3);
  a.insert(0, 1);
  const std::vector<tg::EdgeSet> same{a, a, a};
  EXPECT_EQ(tg::total_instability(same, 3), 0.0);
  const std::vector<tg::EdgeSet> half{a, b};
  EXPECT_DOUBLE_EQ(tg::total_instability(half, 3), 0.5 / 3.0);
  tg::EdgeSet full(2);
  full.insert(0, 1);
  const std::vector<tg::EdgeSet> split{full, tg::EdgeSet(2)};
  EXPECT_DOUBLE_EQ(tg::total_instability(split, 2), 0.5);
}

TEST(Stars, StableSubsamplesPickDensest) {
  Eigen::Matrix3d S;
  S << 1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0;
  const tg::CovarianceBuilder same = [&](const std::vector<std::size_t>&) -> Eigen::MatrixXd { return S; };
  const std::vector<double> path{0.6, 0.3, 0.1, 0.05};
  const auto sel = tg::stars_select(same, 500, path, {}, 7);
  EXPECT_EQ(sel.index, 3u);
  for (double s : sel.scores) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(tg::stars_subsample_size(500), 223u);
  EXPECT_THROW(tg::stars_select(same, 50, path, {}, 7), tg::ValidationError);
}

TEST(Stars, RecallOnChain) {
  std::vector<double> recall;
  const auto scheme = tg::identical_scheme(10, -0.5, 2.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = chain_data(10, 2000, 700 + seed);
    const tg::CovarianceBuilder build = [&](const std::vector<std::size_t>& rows) -> Eigen::MatrixXd {
      return tg::psd_repair(tg::estimate_covariance(data.select_rows(rows), scheme)).matrix;
    };
    std::vector<std::size_t> all(2000);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto sel = tg::stars_select(build, 2000, tg::lambda_path(build(all), 20, 0.05), {}, seed);
    const auto edges = tg::edge_set(sel.estimate);
    double hit = 0;
    for (std::size_t i = 0; i + 1 < 10; ++i) hit += edges.contains(i, i + 1) ? 1 : 0;
    recall.push_back(hit / 9.0);
  }
  std::nth_element(recall.begin(), recall.begin() + 5, recall.end());
  EXPECT_GE(recall[5], 0.9);
}
