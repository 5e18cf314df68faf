#include "ilts/oodlab.hpp"

#include <algorithm>
#include <string>

namespace ilts {

NeedleDataset make_swap(const NeedleDataset& source, std::optional<int> wrong_segment) {
  const int n = source.n_systems();
  const int needle = source.needle_segment();
  if (source.cfg.uncut()) throw Error(Errc::InvalidArgument, "the uncut control has no query open");
  const int wrong = wrong_segment.value_or(needle + 1 < n ? needle + 1 : needle - 1);
  if (wrong == needle || n == 1) {
    throw Error(Errc::IndexCollision, "wrong segment " + std::to_string(wrong) + " is the needle");
  }
  if (wrong < 0 || wrong >= n) throw Error(Errc::InvalidArgument, "wrong segment outside the haystack");
  NeedleDataset out = source;
  out.kind = OodKind::SwapToWrongSeen;
  out.swap_segment = wrong;
  for (std::size_t t = 0; t < out.n_traces(); ++t) {
    out.query_pair[t] = out.pairs[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(wrong)];
  }
  return out;
}

NeedleDataset make_synchronized(const TraceLibrary& lib, const NeedleConfig& cfg, std::uint64_t seed) {
  if (lib.family == Family::Identity) {
    throw Error(Errc::FamilyUnsupported, "rewinding identity systems is degenerate");
  }
  NeedleDataset out = build_needle_dataset(lib, cfg);
  out.kind = OodKind::SynchronizedRotations;
  const int n = cfg.n_systems;
  const int l = cfg.seg_len;
  const int needle = out.needle_segment();
  for (int c = 0; c < cfg.n_configs; ++c) {
    for (int i = 0; i < cfg.n_inits; ++i) {
      const std::size_t t = out.trace_index(c, i);
      Rng rng = make_rng(seed, t);
      const StateVec x10 = sample_initial_state(rng);
      for (int j = 0; j < n; ++j) {
        const StateMat& u = lib.systems[static_cast<std::size_t>(c + j)].entries;
        StateVec x = x10;
        for (int s = l - 1; s >= 0; --s) {
          x = apply_transposed(u, x);
          std::copy_n(x.data(), kStateDim, out.haystack_data(t, j, s));
        }
        out.haystack_seq[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] = -1;
      }
      const StateMat& un = lib.systems[static_cast<std::size_t>(c + needle)].entries;
      StateVec x = x10;
      for (int k = 1; k <= l; ++k) {
        std::copy_n(x.data(), kStateDim, out.test_data(t, k));
        x = apply(un, x);
      }
      out.test_seq[t] = -1;
    }
  }
  return out;
}

NeedleDataset make_unseen_label(const NeedleDataset& source) {
  if (source.cfg.uncut()) throw Error(Errc::InvalidArgument, "the uncut control has no query open");
  const int n = source.n_systems();
  if (n >= kLabelPairs) throw Error(Errc::NoFreeLabel, "all label pairs are used by the haystack");
  NeedleDataset out = source;
  out.kind = OodKind::UnseenLabelMisdirect;
  for (std::size_t t = 0; t < out.n_traces(); ++t) {
    const auto b = out.pairs.begin() + static_cast<std::ptrdiff_t>(t * static_cast<std::size_t>(n));
    for (int p = 0; p < kLabelPairs; ++p) {
      if (std::find(b, b + n, static_cast<std::int8_t>(p)) == b + n) {
        out.query_pair[t] = static_cast<std::int8_t>(p);
        break;
      }
    }
  }
  return out;
}

NeedleDataset make_seen_label_new_sequence(const NeedleDataset& source, const TraceLibrary& fresh,
                                           const TraceLibrary& source_library) {
  if (source.cfg.uncut()) throw Error(Errc::InvalidArgument, "the uncut control has no query open");
  if (fresh.num_sequences() == 0 || fresh.length < static_cast<std::size_t>(source.seg_len())) {
    throw Error(Errc::LibraryExhausted, "fresh library cannot supply a test segment");
  }
  const int n = source.n_systems();
  NeedleDataset out = source;
  out.kind = OodKind::SeenLabelNewSequence;
  for (int c = 0; c < source.cfg.n_configs; ++c) {
    for (int i = 0; i < source.cfg.n_inits; ++i) {
      const std::size_t t = out.trace_index(c, i);
      const std::size_t seq = t % fresh.num_sequences();
      const SystemMatrix& u = fresh.systems[fresh.system_of(seq)];
      for (int j = 0; j < n; ++j) {
        const std::size_t sys = static_cast<std::size_t>(c + j);
        if (sys < source_library.n_systems && source_library.systems[sys].entries == u.entries) {
          throw Error(Errc::SystemCollision, "fresh system " + std::to_string(fresh.system_of(seq)) +
                                                 " appears in the haystack of config " +
                                                 std::to_string(c));
        }
      }
      for (int k = 1; k <= source.seg_len(); ++k) {
        std::copy_n(fresh.state_data(seq, static_cast<std::size_t>(k - 1)), kStateDim, out.test_data(t, k));
      }
      out.test_seq[t] = -1;
      out.test_step0[t] = 0;
      out.test_slot[t] = static_cast<std::int8_t>(n);
    }
  }
  return out;
}

double synchronization_residual(const NeedleDataset& ds, const TraceLibrary& lib) {
  double worst = 0.0;
  const int l = ds.seg_len();
  for (int c = 0; c < ds.cfg.n_configs; ++c) {
    for (int i = 0; i < ds.cfg.n_inits; ++i) {
      const std::size_t t = ds.trace_index(c, i);
      const StateVec x10 = ds.test_state(t, 1);
      for (int j = 0; j < ds.n_systems(); ++j) {
        const StateMat& u = lib.systems[static_cast<std::size_t>(c + j)].entries;
        worst = std::max(worst, (u * ds.haystack_state(t, j, l - 1) - x10).norm());
      }
    }
  }
  return worst;
}

}  // namespace ilts
