#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "truncgraph/errors.hpp"
#include "truncgraph/io.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"

namespace tg = truncgraph;
using tg::PairBounds;
using tg::testing::Gen;

namespace {

tg::ZeroInflatedMatrix rows2(std::initializer_list<std::pair<double, double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index i = 0;
  for (auto [a, b] : rows) {
    m(i, 0) = a;
    m(i, 1) = b;
    ++i;
  }
  return tg::ZeroInflatedMatrix(m);
}

// Row-by-row kernel sum, the reference for the bucketed objective.
double naive_loglik(double s, const tg::ZeroInflatedMatrix& data, const PairBounds& b) {
  double total = 0.0;
  const auto& v = data.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double yj = v(i, 0), yk = v(i, 1);
    if (yj == 0.0 && yk == 0.0) total += std::log(tg::phi00(s, b));
    else if (yj == 0.0) total += std::log(tg::phi01(s, yk, b));
    else if (yk == 0.0) total += std::log(tg::phi10(s, yj, b));
    else total += std::log(tg::phi11(s, yj, yk));
  }
  return total;
}

tg::ZeroInflatedMatrix simulate_pair(double sigma, const tg::TruncationScheme& scheme, std::size_t n,
                                     std::uint64_t seed) {
  Eigen::Matrix2d cov;
  cov << 1.0, sigma, sigma, 1.0;
  const auto truth = tg::ground_truth_from_covariance(cov);
  return tg::truncate(tg::sample_latent(truth, n, seed), scheme);
}

double estimate(const tg::ZeroInflatedMatrix& data, const tg::TruncationScheme& scheme) {
  return tg::estimate_pair_sigma(tg::bucketize(data, 0, 1), PairBounds::of(scheme, 0, 1)).sigma;
}

}  // namespace

TEST(ZeroInflatedMatrix, Validation) {
  EXPECT_THROW(tg::ZeroInflatedMatrix(Eigen::MatrixXd::Zero(1, 3)), tg::ValidationError);
  EXPECT_THROW(tg::ZeroInflatedMatrix(Eigen::MatrixXd::Zero(3, 1)), tg::ValidationError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = NAN;
  EXPECT_THROW(tg::ZeroInflatedMatrix{bad}, tg::ValidationError);

  const tg::TruncationScheme scheme({-0.5, -0.5}, {2.0, 2.0});
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3, 2);
  out(2, 1) = 2.5;
  try {
    tg::ZeroInflatedMatrix(out, scheme);
    FAIL() << "expected a validation error";
  } catch (const tg::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3, column 2"), std::string::npos) << e.what();
  }
}

TEST(Bucketize, SpecExample) {
  const auto data = rows2({{0, 0}, {0, 0.4}, {1.2, 0}, {0.5, 0.5}});
  const auto b = tg::bucketize(data, 0, 1);
  EXPECT_EQ(b.n00, 1u);
  EXPECT_EQ(b.n01, 1u);
  EXPECT_EQ(b.n10, 1u);
  EXPECT_EQ(b.n11, 1u);
  EXPECT_EQ(b.obs01, std::vector<double>{0.4});
  EXPECT_EQ(b.obs10, std::vector<double>{1.2});
  EXPECT_DOUBLE_EQ(b.s_jk, 0.25);
  EXPECT_DOUBLE_EQ(b.s_jj, 0.25);
}

TEST(Bucketize, AllObservedAndAllCensored) {
  const auto obs = tg::bucketize(rows2({{0.1, 0.2}, {0.3, -0.4}, {1.0, 1.0}}), 0, 1);
  EXPECT_EQ(obs.n11, 3u);
  EXPECT_EQ(obs.n00 + obs.n01 + obs.n10, 0u);
  const auto cens = tg::bucketize(rows2({{0, 0}, {0, 0}}), 0, 1);
  EXPECT_EQ(cens.n00, 2u);
  EXPECT_EQ(cens.s_jj + cens.s_kk + cens.s_jk, 0.0);
  EXPECT_FALSE(cens.informative());
}

TEST(Bucketize, Invariants) {
  Gen gen(21);
  const auto scheme = gen.scheme(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto data = tg::truncate(
        tg::sample_latent(tg::ground_truth_from_covariance(gen.correlation(3)), 50, rep), scheme);
    const auto b = tg::bucketize(data, 0, 2);
    EXPECT_EQ(b.total(), 50u);
    EXPECT_EQ(b.obs01.size(), b.n01);
    EXPECT_EQ(b.obs10.size(), b.n10);
    EXPECT_LE(b.s_jk * b.s_jk, b.s_jj * b.s_kk * (1 + 1e-12));
  }
}

TEST(PairLoglik, ClosedForms) {
  const PairBounds bounds(-0.5, 2.0, -0.5, 2.0);
  const auto data = rows2({{0.1, 0.2}, {0.3, -0.4}, {1.0, 1.5}});
  const auto b = tg::bucketize(data, 0, 1);
  const double expected = -3.0 * std::log(2 * std::numbers::pi) - 0.5 * (b.s_jj + b.s_kk);
  EXPECT_NEAR(tg::pair_loglik(0.0, b, bounds), expected, 1e-12);

  const auto single = tg::bucketize(rows2({{0, 0}, {0, 0}}), 0, 1);
  EXPECT_NEAR(tg::pair_loglik(0.3, single, bounds), 2.0 * std::log(tg::phi00(0.3, bounds)), 1e-12);
}

TEST(PairLoglik, MatchesNaiveRowSum) {
  Gen gen(22);
  for (int rep = 0; rep < 100; ++rep) {
    const auto scheme = gen.scheme(2);
    const auto data = simulate_pair(gen.sigma(0.9), scheme, 6, 1000 + rep);
    const auto bounds = PairBounds::of(scheme, 0, 1);
    const auto buckets = tg::bucketize(data, 0, 1);
    for (double s : {-0.95, -0.3, 0.0, 0.42, 0.9}) {
      EXPECT_NEAR(tg::pair_loglik(s, buckets, bounds), naive_loglik(s, data, bounds), 1e-10);
    }
  }
}

TEST(PairLoglik, RejectsOutsideSearchInterval) {
  const auto b = tg::bucketize(rows2({{0.1, 0.2}, {0.3, -0.4}}), 0, 1);
  EXPECT_THROW(tg::pair_loglik(0.9995, b, PairBounds(-1, 1, -1, 1)), tg::DomainError);
}

TEST(EstimatePairSigma, Degenerate) {
  const auto b = tg::bucketize(rows2({{0, 0}, {0, 0}, {0, 0}}), 0, 1);
  const auto est = tg::estimate_pair_sigma(b, PairBounds(-0.5, 2, -0.5, 2));
  EXPECT_TRUE(est.degenerate);
  EXPECT_EQ(est.sigma, 0.0);
}

TEST(EstimatePairSigma, MonteCarloConsistency) {
  const tg::TruncationScheme scheme({-0.5, -0.5}, {2.0, 2.0});
  for (double truth : {0.5, 0.0}) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) mean += estimate(simulate_pair(truth, scheme, 5000, seed), scheme);
    mean /= 20.0;
    EXPECT_NEAR(mean, truth, 0.05) << "sigma* = " << truth;
  }
}

TEST(EstimatePairSigma, ColumnNegationEquivariance) {
  Gen gen(23);
  for (int rep = 0; rep < 10; ++rep) {
    const auto scheme = gen.scheme(2);
    const auto data = simulate_pair(gen.sigma(0.8), scheme, 300, 2000 + rep);
    Eigen::MatrixXd flipped = data.values();
    flipped.col(0) *= -1.0;
    const tg::TruncationScheme reflected({-scheme.upper(0), scheme.lower(1)}, {-scheme.lower(0), scheme.upper(1)});
    const double a = estimate(data, scheme);
    const double b = estimate(tg::ZeroInflatedMatrix(flipped, reflected), reflected);
    EXPECT_NEAR(a, -b, 1e-5);
  }
}

TEST(EstimatePairSigma, InteriorMaximumBeatsBoundary) {
  Gen gen(24);
  const tg::PairEstimatorConfig config;
  for (int rep = 0; rep < 20; ++rep) {
    const auto scheme = gen.scheme(2);
    const auto data = simulate_pair(gen.sigma(0.8), scheme, 400, 3000 + rep);
    const auto buckets = tg::bucketize(data, 0, 1);
    const auto bounds = PairBounds::of(scheme, 0, 1);
    const auto est = tg::estimate_pair_sigma(buckets, bounds, config);
    const double edge = 1.0 - config.delta;
    EXPECT_LT(std::abs(est.sigma), edge);
    EXPECT_GE(est.loglik, tg::pair_loglik(edge, buckets, bounds));
    EXPECT_GE(est.loglik, tg::pair_loglik(-edge, buckets, bounds));
    for (double d : {-1e-3, 1e-3}) {
      const double s = std::clamp(est.sigma + d, -edge, edge);
      EXPECT_GE(est.loglik, tg::pair_loglik(s, buckets, bounds) - 1e-9);
    }
  }
}

TEST(EstimateCovariance, TwoVariables) {
  const tg::TruncationScheme scheme({-0.5, -1.0}, {2.0, 1.0});
  const auto data = simulate_pair(0.4, scheme, 500, 7);
  const auto est = tg::estimate_covariance(data, scheme);
  EXPECT_EQ(est.matrix(0, 0), 1.0);
  EXPECT_EQ(est.matrix(1, 1), 1.0);
  EXPECT_EQ(est.matrix(0, 1), est.matrix(1, 0));
  EXPECT_EQ(est.matrix(0, 1), estimate(data, scheme));
  ASSERT_EQ(est.pairs.size(), 1u);
}

TEST(EstimateCovariance, IdentityTruth) {
  const auto scheme = tg::identical_scheme(5, -0.5, 2.0);
  const auto truth = tg::ground_truth_from_covariance(Eigen::MatrixXd::Identity(5, 5));
  const auto data = tg::truncate(tg::sample_latent(truth, 5000, 31), scheme);
  const auto est = tg::estimate_covariance(data, scheme);
  const Eigen::MatrixXd off = est.matrix - Eigen::MatrixXd::Identity(5, 5);
  EXPECT_LE(off.cwiseAbs().maxCoeff(), 0.08);
}

TEST(EstimateCovariance, RowPermutationAndWorkerInvariance) {
  Gen gen(25);
  const auto scheme = gen.scheme(4);
  const auto data = tg::truncate(tg::sample_latent(tg::ground_truth_from_covariance(gen.correlation(4)), 150, 5), scheme);
  const auto perm = gen.permutation(150);
  const auto base = tg::estimate_covariance(data, scheme, {}, 1);
  const auto shuffled = tg::estimate_covariance(data.select_rows(perm), scheme, {}, 3);
  // Summation order changes the sufficient statistics in the last bits; the
  // optimizer resolves sigma to tol_sigma.
  EXPECT_LE((base.matrix - shuffled.matrix).cwiseAbs().maxCoeff(), tg::PairEstimatorConfig{}.tol_sigma);
  const auto threaded = tg::estimate_covariance(data, scheme, {}, 4);
  EXPECT_TRUE(base.matrix == threaded.matrix);
}

TEST(EstimateCovariance, ErrorShrinksWithSampleSize) {
  tg::GraphSpec spec;
  spec.structure = tg::GraphStructure::chain;
  spec.p = 10;
  const auto truth = tg::make_ground_truth(spec);
  const auto scheme = tg::identical_scheme(10, -0.5, 2.0);
  std::vector<double> medians;
  for (std::size_t n : {500u, 2000u, 8000u}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto data = tg::truncate(tg::sample_latent(truth, n, 100 + seed), scheme);
      errs.push_back((tg::estimate_covariance(data, scheme).matrix - truth.sigma_star).cwiseAbs().maxCoeff());
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    medians.push_back(errs[5]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(EstimateCovariance, GoldenDataset) {
  const std::filesystem::path dir = TRUNCGRAPH_TEST_DATA_DIR;
  const auto scheme = tg::read_scheme_csv(dir / "golden_scheme.csv");
  const tg::ZeroInflatedMatrix data(tg::read_matrix_csv(dir / "golden_data.csv"), scheme);
  const Eigen::MatrixXd golden = tg::read_matrix_csv(dir / "golden_sigma.csv");
  const auto est = tg::psd_repair(tg::estimate_covariance(data, scheme));
  EXPECT_LE((est.matrix - golden).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(PsdRepair, UnchangedWhenWellConditioned) {
  tg::CovarianceEstimate e;
  e.matrix.resize(2, 2);
  e.matrix << 1.0, 0.9, 0.9, 1.0;
  EXPECT_TRUE(tg::psd_repair(e, 1e-3).matrix == e.matrix);
  Gen gen(26);
  e.matrix = gen.correlation(6);
  EXPECT_LE((tg::psd_repair(e).matrix - e.matrix).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PsdRepair, IndefiniteInput) {
  tg::CovarianceEstimate e;
  e.matrix.resize(3, 3);
  e.matrix << 1.0, 0.9, -0.6, 0.9, 1.0, 0.7, -0.6, 0.7, 1.0;
  ASSERT_LT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e.matrix).eigenvalues().minCoeff(), 0.0);
  const auto fixed = tg::psd_repair(e, 1e-3);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fixed.matrix).eigenvalues().minCoeff(), 1e-3 * (1 - 1e-9));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(fixed.matrix(i, i), 1.0);
}

TEST(PsdRepair, AlwaysFactorizable) {
  Gen gen(27);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(gen.index(8));
    tg::CovarianceEstimate e;
    e.matrix = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < i; ++j) e.matrix(i, j) = e.matrix(j, i) = gen.uniform(-0.999, 0.999);
    const auto fixed = tg::psd_repair(e);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(fixed.matrix).info(), Eigen::Success);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fixed.matrix).eigenvalues().minCoeff(), 1e-3 * (1 - 1e-9));
  }
}
