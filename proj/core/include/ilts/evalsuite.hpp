#pragma once

#include <cstdint>
#include <vector>

#include "ilts/interleave.hpp"
#include "ilts/metrics.hpp"
#include "ilts/needle.hpp"
#include "ilts/predictors.hpp"

namespace ilts {

struct EvalOptions {
  Aggregation aggregation = Aggregation::MedianThenQuantile;
  std::uint64_t examples_seen = 0;  // copied into every record
  int chunk = 64;                   // traces materialized at a time
  int threads = 1;                  // workers splitting each chunk
};

// Start, one open symbol with a random label, then observations x0..x248 of a
// single sequence. Index k (row k) predicts x_{k-1}; k runs over 1..249.
InterleavedTrace uninterleaved_trace(const TraceLibrary& library, std::size_t sequence, Rng& rng,
                                     int context_len = kContextLen);
std::vector<InterleavedTrace> uninterleaved_traces(const TraceLibrary& library, std::size_t count,
                                                   std::uint64_t seed, int context_len = kContextLen);

// Squared error (summed over the 5 dims) of `pred` at `rows` of each trace,
// against the next-token payload. Result is [trace][row]. Contiguous parts
// of the input are predicted on up to `threads` workers.
std::vector<std::vector<double>> squared_errors(const Predictor& pred,
                                                std::span<const InterleavedTrace> traces,
                                                std::span<const std::vector<int>> rows, int threads = 1);

// Quantiles across sequences at every index; with `with_baseline` the
// pseudoinverse predictor is evaluated on the same traces as well.
std::vector<MetricsRecord> eval_uninterleaved(const Predictor& pred, const TraceLibrary& test_library,
                                              std::size_t n_sequences, std::uint64_t seed,
                                              const EvalOptions& opts = {}, bool with_baseline = true);

inline constexpr int kNeedleIndices[] = {1, 2, 3, 7, 8};

// After-final and after-initial records for k in kNeedleIndices.
std::vector<MetricsRecord> eval_needle(const Predictor& pred, const NeedleDataset& dataset,
                                       const EvalOptions& opts = {});

// Steps 1..8 into every haystack segment. Errc::InvalidArgument for N < 3.
std::vector<MetricsRecord> eval_restart(const Predictor& pred, const NeedleDataset& dataset,
                                        const EvalOptions& opts = {});

// After-final errors for needle positions 0..N-1 followed by the uncut control.
std::vector<MetricsRecord> eval_needle_position_sweep(const Predictor& pred,
                                                      const TraceLibrary& test_library,
                                                      const NeedleConfig& base,
                                                      const EvalOptions& opts = {});

struct PretrainLoss {
  double value = 0.0;     // predictor
  double baseline = 0.0;  // pseudoinverse predictor on the same traces
  std::size_t n_positions = 0;
};

// Mean squared error over every masked position of `n_traces` freshly
// interleaved traces drawn from `held_out` with `seed`.
PretrainLoss pretrain_loss(const Predictor& pred, const TraceLibrary& held_out,
                           std::size_t n_traces = 40000, std::uint64_t seed = 0,
                           const EvalOptions& opts = {}, const GenConfig& cfg = {});

}  // namespace ilts
