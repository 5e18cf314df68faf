#include <benchmark/benchmark.h>

#include "ilts/library.hpp"

namespace ilts {
namespace {

void BM_PinvPredict(benchmark::State& state) {
  const TraceLibrary lib = build_library(1, 1, kContextLen, Family::Orthogonal, 4);
  const StateSequence seq = lib.sequence(0);
  const auto history = std::span<const StateVec>(seq.states).first(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pinv_predict(history));
}
BENCHMARK(BM_PinvPredict)->Arg(2)->Arg(6)->Arg(50)->Arg(250);

void BM_SampleSystem(benchmark::State& state) {
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(sample_system(rng, Family::Orthogonal));
}
BENCHMARK(BM_SampleSystem);

}  // namespace
}  // namespace ilts
