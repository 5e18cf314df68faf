#include <benchmark/benchmark.h>

#include "ilts/disentangled.hpp"
#include "ilts/training.hpp"

namespace ilts {
namespace {

const TraceLibrary& library() {
  static const TraceLibrary lib = build_library(500, 1, kContextLen, Family::Orthogonal, 3);
  return lib;
}

SizePreset preset_arg(const benchmark::State& state) { return static_cast<SizePreset>(state.range(0)); }

void BM_Forward(benchmark::State& state) {
  const Transformer<float> model(ModelConfig::preset(preset_arg(state)), 1);
  const Batch b = make_batch(training_traces(library(), 1, 0, 4));
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(b.tokens, b.batch, b.seq));
  state.SetItemsProcessed(state.iterations() * b.batch);
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelState s;
  s.model = Transformer<float>(ModelConfig::preset(preset_arg(state)), 1);
  s.train.batch_size = 16;
  s.train.learning_rate = 1e-4;
  const Batch b = make_batch(training_traces(library(), 1, 0, 16));
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s, b));
  state.SetItemsProcessed(state.iterations() * b.batch);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DisentangledForward(benchmark::State& state) {
  const Transformer<float> model(ModelConfig::preset(preset_arg(state)), 1);
  const EdgeGraph g = EdgeGraph::for_model(model.config());
  const Batch b = make_batch(training_traces(library(), 1, 0, 1));
  const ad::Matrix<float> gates = ad::Matrix<float>::Ones(1, static_cast<Eigen::Index>(g.size()));
  for (auto _ : state) benchmark::DoNotOptimize(disentangled_predict(model, g, gates, b.tokens, b.batch, b.seq));
}
BENCHMARK(BM_DisentangledForward)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ilts
