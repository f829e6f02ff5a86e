#include <benchmark/benchmark.h>

#include <random>

#include "moo/combinators.hpp"
#include "moo/minnorm.hpp"
#include "moo/optimizer.hpp"
#include "moo/toy_problem.hpp"

namespace {

std::vector<moo::Vector> random_vectors(std::size_t k, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<moo::Vector> v(k, moo::Vector(d));
  for (auto& vi : v) {
    for (double& x : vi) x = normal(rng);
  }
  return v;
}

void BM_MinNormPoint(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto v = random_vectors(k, d, 7);
  const moo::SolverConfig config{10000, 1e-8};
  for (auto _ : state) benchmark::DoNotOptimize(moo::min_norm_point(v, config));
}
BENCHMARK(BM_MinNormPoint)->ArgsProduct({{3, 4, 8}, {2, 16, 64}});

void BM_MinNormPair(benchmark::State& state) {
  const auto v = random_vectors(2, static_cast<std::size_t>(state.range(0)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(moo::min_norm_pair(v[0], v[1]));
}
BENCHMARK(BM_MinNormPair)->Arg(2)->Arg(64)->Arg(1024);

void BM_MgdaDecoupled(benchmark::State& state) {
  moo::GradientSet g;
  g.grads = random_vectors(4, 64, 13);
  g.losses.values = {0.5, 1.0, 2.0, 4.0};
  for (auto _ : state) benchmark::DoNotOptimize(moo::mgda_decoupled_weights(g, moo::SolverConfig{}));
}
BENCHMARK(BM_MgdaDecoupled);

void BM_ToyTrain(benchmark::State& state) {
  moo::TrainConfig cfg;
  cfg.max_steps = 1500;
  cfg.combinator = moo::CombinatorKind::MGDADecoupled;
  for (auto _ : state) benchmark::DoNotOptimize(moo::train(moo::ToyProblem2D{}, moo::kToyInit, cfg));
}
BENCHMARK(BM_ToyTrain)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
