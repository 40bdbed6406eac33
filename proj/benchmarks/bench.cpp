#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "ifqa/assessor.hpp"
#include "ifqa/degradation.hpp"
#include "ifqa/evalstats.hpp"
#include "ifqa/networks.hpp"

namespace {

void BM_Degrade(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const auto face = ifqa::synth_face(1, 0, res).image;
  ifqa::Rng rng(2);
  const auto params = ifqa::sample_params(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ifqa::degrade(face, params));
}
BENCHMARK(BM_Degrade)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

std::vector<double> scores(std::size_t n, std::uint64_t seed) {
  ifqa::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = ifqa::uniform01(rng);
  return v;
}

void BM_Srcc(benchmark::State& state) {
  const auto x = scores(static_cast<std::size_t>(state.range(0)), 1);
  const auto y = scores(x.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(ifqa::srcc(x, y));
}
BENCHMARK(BM_Srcc)->Arg(6)->Arg(1000);

void BM_Krcc(benchmark::State& state) {
  const auto x = scores(static_cast<std::size_t>(state.range(0)), 3);
  const auto y = scores(x.size(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(ifqa::krcc(x, y));
}
BENCHMARK(BM_Krcc)->Arg(6)->Arg(1000);

void BM_ScoreMap(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  ifqa::Discriminator d = ifqa::build_discriminator(ifqa::NetConfig::toy(), 1);
  const auto face = ifqa::synth_face(1, 0, res).image;
  for (auto _ : state) benchmark::DoNotOptimize(ifqa::score_map(face, d));
}
BENCHMARK(BM_ScoreMap)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
