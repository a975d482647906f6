#include <benchmark/benchmark.h>

#include "truncgraph/glasso.hpp"
#include "truncgraph/pairlik.hpp"
#include "truncgraph/simgen.hpp"
#include "truncgraph/truncdist.hpp"

namespace tg = truncgraph;

namespace {

const tg::PairBounds kBounds(-0.5, 2.0, -1.0, 1.5);

void BM_Phi01(benchmark::State& state) {
  double y = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tg::phi01(0.42, y, kBounds));
    y = y > 1.4 ? -0.9 : y + 0.01;
  }
}
BENCHMARK(BM_Phi01);

void BM_Phi00(benchmark::State& state) {
  double s = -0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tg::phi00(s, kBounds));
    s = s > 0.9 ? -0.9 : s + 0.01;
  }
}
BENCHMARK(BM_Phi00);

tg::ZeroInflatedMatrix chain_sample(std::size_t p, std::size_t n, const tg::TruncationScheme& scheme) {
  tg::GraphSpec spec;
  spec.p = p;
  return tg::truncate(tg::sample_latent(tg::make_ground_truth(spec), n, 7), scheme);
}

void BM_EstimatePairSigma(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto scheme = tg::identical_scheme(2, -0.5, 2.0);
  const auto data = chain_sample(2, n, scheme);
  const auto buckets = tg::bucketize(data, 0, 1);
  const auto bounds = tg::PairBounds::of(scheme, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(tg::estimate_pair_sigma(buckets, bounds).sigma);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EstimatePairSigma)->RangeMultiplier(4)->Range(500, 32000)->Complexity();

void BM_EstimateCovariance(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const auto scheme = tg::identical_scheme(p, -0.5, 2.0);
  const auto data = chain_sample(p, 500, scheme);
  for (auto _ : state) benchmark::DoNotOptimize(tg::estimate_covariance(data, scheme).matrix.data());
}
BENCHMARK(BM_EstimateCovariance)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_Glasso(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  tg::GraphSpec spec;
  spec.p = p;
  const auto truth = tg::make_ground_truth(spec);
  const Eigen::MatrixXd latent = tg::sample_latent(truth, 500, 11);
  const Eigen::MatrixXd centered = latent.rowwise() - latent.colwise().mean();
  Eigen::MatrixXd S = centered.transpose() * centered / 499.0;
  const Eigen::VectorXd d = S.diagonal().cwiseSqrt().cwiseInverse();
  S = d.asDiagonal() * S * d.asDiagonal();
  for (auto _ : state) benchmark::DoNotOptimize(tg::graphical_lasso(S, 0.1).theta.data());
}
BENCHMARK(BM_Glasso)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
