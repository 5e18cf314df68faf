#pragma once

// Cutting and interleaving library sequences into labeled training traces.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "ilts/library.hpp"
#include "ilts/trace.hpp"

namespace ilts {

struct GenConfig {
  double zipf_s = 1.5;
  int zipf_cap = 25;
  double cut_rate_multiplier = 2.0;  // C ~ Poisson(multiplier * N)
  int context_len = kContextLen;
  int label_pairs = kLabelPairs;
};

// P(N = k) for k = 1..cap, index k-1.
std::vector<double> zipf_pmf(double s, int cap);

int sample_num_systems(Rng& rng, const GenConfig& cfg);

// Cut placement and segment layout, separated from payload filling so the
// distributional properties can be checked without a library.
struct SegmentPlan {
  int first = 0;  // first context index of the segment
  int last = 0;   // inclusive
  int slot = 0;
};

struct TracePlan {
  int num_systems = 0;
  int num_cuts = 0;
  std::vector<int> cuts;            // as sampled, in draw order
  std::vector<SegmentPlan> segments;
  std::vector<std::int8_t> slot_pairs;
};

// Steps 2 and 4-7 of the interleaving procedure (no library access).
// Cuts are uniform over 1..context_len-1. Index 1 always begins the first
// segment; coincident cuts collapse into one boundary.
TracePlan plan_trace(Rng& rng, const GenConfig& cfg);

class Interleaver {
 public:
  Interleaver(const TraceLibrary& library, GenConfig cfg = {});

  InterleavedTrace operator()(Rng& rng) const;

  const GenConfig& config() const { return cfg_; }

 private:
  const TraceLibrary* library_;
  GenConfig cfg_;
};

InterleavedTrace interleave(const TraceLibrary& library, Rng& rng, const GenConfig& cfg = {});

// Trace i of a batch is drawn with make_rng(seed, i).
std::vector<InterleavedTrace> interleave_batch(const TraceLibrary& library, std::uint64_t seed,
                                               std::uint64_t first_index, std::size_t count,
                                               const GenConfig& cfg = {});

// Trace batch file; see docs/formats.md.
void write_traces(const std::vector<InterleavedTrace>& traces, std::uint64_t seed,
                  const std::filesystem::path& path);
std::vector<InterleavedTrace> read_traces(const std::filesystem::path& path,
                                          std::uint64_t* seed_out = nullptr);

}  // namespace ilts
