// Per-call cost of the three landscape extractors and of the analyser's
// building blocks on random observations. Arguments are (m, d).

#include "ltk/analyzer.hpp"
#include "ltk/ela.hpp"
#include "ltk/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ltk;

Observation random_obs(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Observation o{Matrix(m, d), Vector(m), Vector::Constant(d, -5.0), Vector::Constant(d, 5.0)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) o.X(i, j) = rng.uniform(-5.0, 5.0);
    o.y[i] = rng.uniform(0.0, 100.0);
  }
  return o;
}

void BM_Neural(benchmark::State& state) {
  Rng rng(1);
  const auto net = analyzer::random_network({}, rng);
  const auto obs = random_obs(state.range(0), state.range(1), 2);
  for (auto _ : state) benchmark::DoNotOptimize(analyzer::analyze(net, obs));
}

void BM_ElaFull(benchmark::State& state) {
  const auto obs = random_obs(state.range(0), state.range(1), 3);
  for (auto _ : state) benchmark::DoNotOptimize(ela::full_suite(obs));
}

void BM_Handcrafted(benchmark::State& state) {
  const auto obs = random_obs(state.range(0), state.range(1), 4);
  const std::vector<double> history{obs.y.minCoeff()};
  for (auto _ : state) benchmark::DoNotOptimize(ela::handcrafted_state({0, 1, history, obs}));
}

void BM_AttnBlock(benchmark::State& state) {
  Rng rng(5);
  const auto net = analyzer::random_network({}, rng);
  Matrix x(state.range(0), 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(analyzer::attn_block(x, net.layers[0].inter, 1));
}

}  // namespace

BENCHMARK(BM_Neural)->Args({100, 10})->Args({100, 100})->Args({1000, 10})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ElaFull)->Args({100, 10})->Args({100, 100})->Args({1000, 10})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Handcrafted)->Args({100, 10})->Args({1000, 100})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AttnBlock)->Arg(10)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
