#include <benchmark/benchmark.h>

#include "ilts/interleave.hpp"
#include "ilts/needle.hpp"

namespace ilts {
namespace {

const TraceLibrary& library() {
  static const TraceLibrary lib = build_library(2000, 1, kContextLen, Family::Orthogonal, 1);
  return lib;
}

void BM_PlanTrace(benchmark::State& state) {
  const GenConfig cfg;
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng = make_rng(7, i++);
    benchmark::DoNotOptimize(plan_trace(rng, cfg));
  }
}
BENCHMARK(BM_PlanTrace);

void BM_Interleave(benchmark::State& state) {
  const Interleaver gen(library());
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng = make_rng(8, i++);
    benchmark::DoNotOptimize(gen(rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Interleave);

void BM_BuildLibrary(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_library(static_cast<std::size_t>(state.range(0)), 1, kContextLen, Family::Orthogonal, 2));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildLibrary)->Arg(100)->Arg(1000);

void BM_NeedleDataset(benchmark::State& state) {
  NeedleConfig cfg;
  cfg.n_systems = static_cast<int>(state.range(0));
  cfg.n_inits = 1;
  for (auto _ : state) benchmark::DoNotOptimize(build_needle_dataset(library(), cfg));
}
BENCHMARK(BM_NeedleDataset)->Arg(5)->Arg(19);

}  // namespace
}  // namespace ilts
