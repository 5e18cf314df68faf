#include "ilts/interleave.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ilts {

std::vector<double> zipf_pmf(double s, int cap) {
  std::vector<double> pmf(static_cast<std::size_t>(cap));
  double norm = 0.0;
  for (int k = 1; k <= cap; ++k) norm += std::pow(static_cast<double>(k), -s);
  for (int k = 1; k <= cap; ++k) {
    pmf[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -s) / norm;
  }
  return pmf;
}

int sample_num_systems(Rng& rng, const GenConfig& cfg) {
  const auto pmf = zipf_pmf(cfg.zipf_s, cfg.zipf_cap);
  std::discrete_distribution<int> dist(pmf.begin(), pmf.end());
  return dist(rng) + 1;
}

TracePlan plan_trace(Rng& rng, const GenConfig& cfg) {
  if (cfg.zipf_cap > cfg.label_pairs) {
    throw Error(Errc::InvalidArgument, "zipf cap exceeds the number of label pairs");
  }
  TracePlan plan;
  plan.num_systems = sample_num_systems(rng, cfg);

  // Injective, uniform label assignment via a partial Fisher-Yates shuffle.
  std::vector<std::int8_t> pairs(static_cast<std::size_t>(cfg.label_pairs));
  std::iota(pairs.begin(), pairs.end(), std::int8_t{0});
  for (int i = 0; i < plan.num_systems; ++i) {
    std::uniform_int_distribution<int> pick(i, cfg.label_pairs - 1);
    std::swap(pairs[static_cast<std::size_t>(i)], pairs[static_cast<std::size_t>(pick(rng))]);
  }
  plan.slot_pairs.assign(pairs.begin(), pairs.begin() + plan.num_systems);

  std::poisson_distribution<int> poisson(cfg.cut_rate_multiplier * plan.num_systems);
  plan.num_cuts = poisson(rng);
  std::uniform_int_distribution<int> where(1, cfg.context_len - 1);
  plan.cuts.reserve(static_cast<std::size_t>(plan.num_cuts));
  for (int i = 0; i < plan.num_cuts; ++i) plan.cuts.push_back(where(rng));

  std::vector<int> bounds = plan.cuts;
  bounds.push_back(1);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  bounds.push_back(cfg.context_len);

  std::uniform_int_distribution<int> slot(0, plan.num_systems - 1);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    plan.segments.push_back({bounds[b], bounds[b + 1] - 1, slot(rng)});
  }
  return plan;
}

Interleaver::Interleaver(const TraceLibrary& library, GenConfig cfg)
    : library_(&library), cfg_(cfg) {
  if (library.num_sequences() == 0) throw Error(Errc::InvalidArgument, "empty library");
}

InterleavedTrace Interleaver::operator()(Rng& rng) const {
  const TraceLibrary& lib = *library_;
  const int context = cfg_.context_len;

  // Systems are drawn after the plan; the plan only depends on N.
  TracePlan plan = plan_trace(rng, cfg_);
  const int n_sys = plan.num_systems;
  if (static_cast<std::size_t>(n_sys) > lib.num_sequences()) {
    throw Error(Errc::InsufficientSystems, "library has fewer sequences than N");
  }
  std::vector<std::int32_t> chosen;
  chosen.reserve(static_cast<std::size_t>(n_sys));
  std::uniform_int_distribution<std::size_t> pick(0, lib.num_sequences() - 1);
  while (static_cast<int>(chosen.size()) < n_sys) {
    const auto s = static_cast<std::int32_t>(pick(rng));
    if (std::find(chosen.begin(), chosen.end(), s) == chosen.end()) chosen.push_back(s);
  }

  InterleavedTrace trace;
  trace.sampled_systems = n_sys;
  trace.sampled_cuts = plan.num_cuts;
  trace.slot_sequences = chosen;
  trace.slot_pairs = plan.slot_pairs;
  trace.tokens = TokenMatrix::Zero(context, kTokenDim);
  trace.provenance.assign(static_cast<std::size_t>(context), Provenance{});
  trace.tokens.row(0) = encode_special(TokenKind::Start);

  std::vector<std::int32_t> consumed(static_cast<std::size_t>(n_sys), 0);
  for (const SegmentPlan& seg : plan.segments) {
    const auto slot = static_cast<std::int8_t>(seg.slot);
    const std::int8_t pair = plan.slot_pairs[static_cast<std::size_t>(seg.slot)];
    const int len = seg.last - seg.first + 1;
    auto put_special = [&](int at, TokenKind kind) {
      trace.tokens.row(at) = encode_special(kind, pair);
      trace.provenance[static_cast<std::size_t>(at)] = {kind, pair, slot, -1, -1};
    };
    if (len == 1) {
      put_special(seg.first, TokenKind::Close);
      continue;
    }
    put_special(seg.first, TokenKind::Open);
    for (int at = seg.first + 1; at < seg.last; ++at) {
      const std::int32_t seq = chosen[static_cast<std::size_t>(seg.slot)];
      std::int32_t& step = consumed[static_cast<std::size_t>(seg.slot)];
      if (static_cast<std::size_t>(step) >= lib.length) {
        throw Error(Errc::LibraryExhausted,
                    "sequence " + std::to_string(seq) + " has only " + std::to_string(lib.length) +
                        " states");
      }
      const double* x = lib.state_data(static_cast<std::size_t>(seq), static_cast<std::size_t>(step));
      trace.tokens(at, kPayloadFlagDim) = 1.0;
      for (int d = 0; d < kStateDim; ++d) trace.tokens(at, kPayloadBase + d) = x[d];
      trace.provenance[static_cast<std::size_t>(at)] = {TokenKind::Obs, -1, slot, seq, step};
      ++step;
    }
    put_special(seg.last, TokenKind::Close);
  }
  build_targets_and_mask(trace);
  return trace;
}

InterleavedTrace interleave(const TraceLibrary& library, Rng& rng, const GenConfig& cfg) {
  return Interleaver(library, cfg)(rng);
}

std::vector<InterleavedTrace> interleave_batch(const TraceLibrary& library, std::uint64_t seed,
                                               std::uint64_t first_index, std::size_t count,
                                               const GenConfig& cfg) {
  Interleaver gen(library, cfg);
  std::vector<InterleavedTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, first_index + i);
    out.push_back(gen(rng));
  }
  return out;
}

}  // namespace ilts
