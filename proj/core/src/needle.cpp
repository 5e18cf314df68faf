#include "ilts/needle.hpp"

#include <numeric>
#include <string>

#include "ilts/binary.hpp"

namespace ilts {

namespace {
constexpr std::string_view kNeedleMagic = "ILTD";
constexpr std::uint32_t kNeedleVersion = 1;
}  // namespace

std::string_view ood_name(OodKind kind) {
  switch (kind) {
    case OodKind::None: return "none";
    case OodKind::SwapToWrongSeen: return "swap";
    case OodKind::SynchronizedRotations: return "sync";
    case OodKind::UnseenLabelMisdirect: return "unseen-label";
    case OodKind::SeenLabelNewSequence: return "seen-label-new-sequence";
  }
  return "unknown";
}

OodKind parse_ood(std::string_view name) {
  for (auto k : {OodKind::None, OodKind::SwapToWrongSeen, OodKind::SynchronizedRotations,
                 OodKind::UnseenLabelMisdirect, OodKind::SeenLabelNewSequence}) {
    if (name == ood_name(k)) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown ood kind '" + std::string(name) + "'");
}

NeedleConfig NeedleConfig::desk(int n_systems, int needle_position) {
  NeedleConfig c;
  c.n_systems = n_systems;
  c.n_configs = 10;
  c.n_inits = 100;
  c.needle_position = needle_position;
  return c;
}

void NeedleConfig::validate() const {
  if (n_systems < 1 || n_systems > kLabelPairs) {
    throw Error(Errc::InvalidArgument, "haystack size must be in 1.." + std::to_string(kLabelPairs));
  }
  if (seg_len < 1 || n_configs < 1 || n_inits < 1) {
    throw Error(Errc::InvalidArgument, "seg_len, n_configs and n_inits must be positive");
  }
  if (needle_position != kUncutControl && (needle_position < 0 || needle_position >= n_systems)) {
    throw Error(Errc::InvalidArgument, "needle position " + std::to_string(needle_position) +
                                           " outside the haystack");
  }
}

int NeedleDataset::length() const {
  const int l = cfg.seg_len;
  const int n = cfg.n_systems;
  return cfg.uncut() ? (l + 2) * n + l : (l + 2) * n + l + 2;
}

int NeedleDataset::query_open_row() const {
  return cfg.uncut() ? -1 : (cfg.seg_len + 2) * cfg.n_systems + 1;
}

int NeedleDataset::test_row(int k) const {
  if (cfg.uncut()) return segment_open_row(cfg.n_systems - 1) + cfg.seg_len + k;
  return query_open_row() + k;
}

StateVec NeedleDataset::haystack_state(std::size_t t, int segment, int i) const {
  const double* p = haystack.data() +
                    ((t * static_cast<std::size_t>(cfg.n_systems) + static_cast<std::size_t>(segment)) *
                         static_cast<std::size_t>(cfg.seg_len) +
                     static_cast<std::size_t>(i)) *
                        kStateDim;
  return StateVec(p[0], p[1], p[2], p[3], p[4]);
}

double* NeedleDataset::haystack_data(std::size_t t, int segment, int i) {
  return haystack.data() +
         ((t * static_cast<std::size_t>(cfg.n_systems) + static_cast<std::size_t>(segment)) *
              static_cast<std::size_t>(cfg.seg_len) +
          static_cast<std::size_t>(i)) *
             kStateDim;
}

StateVec NeedleDataset::test_state(std::size_t t, int k) const {
  const double* p =
      test.data() + (t * static_cast<std::size_t>(cfg.seg_len) + static_cast<std::size_t>(k - 1)) * kStateDim;
  return StateVec(p[0], p[1], p[2], p[3], p[4]);
}

double* NeedleDataset::test_data(std::size_t t, int k) {
  return test.data() + (t * static_cast<std::size_t>(cfg.seg_len) + static_cast<std::size_t>(k - 1)) * kStateDim;
}

InterleavedTrace NeedleDataset::trace(std::size_t t) const {
  const int n = cfg.n_systems;
  const int l = cfg.seg_len;
  const int len = length();
  std::vector<Provenance> prov(static_cast<std::size_t>(len));
  std::vector<StateVec> payload(static_cast<std::size_t>(len), StateVec::Zero());
  prov[0] = {TokenKind::Start, -1, -1, -1, -1};
  for (int j = 0; j < n; ++j) {
    const std::int8_t pair = pairs[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    const std::int32_t seq = haystack_seq[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    const auto slot = static_cast<std::int8_t>(j);
    const int open = segment_open_row(j);
    prov[static_cast<std::size_t>(open)] = {TokenKind::Open, pair, slot, -1, -1};
    for (int i = 0; i < l; ++i) {
      const auto r = static_cast<std::size_t>(open + 1 + i);
      prov[r] = {TokenKind::Obs, -1, slot, seq, seq < 0 ? -1 : i};
      payload[r] = haystack_state(t, j, i);
    }
    if (!(cfg.uncut() && j == n - 1)) {
      prov[static_cast<std::size_t>(open + l + 1)] = {TokenKind::Close, pair, slot, -1, -1};
    }
  }
  const std::int8_t tslot = test_slot[t];
  if (!cfg.uncut()) {
    prov[static_cast<std::size_t>(query_open_row())] = {TokenKind::Open, query_pair[t], tslot, -1, -1};
  }
  for (int k = 1; k <= l; ++k) {
    const auto r = static_cast<std::size_t>(test_row(k));
    const std::int32_t seq = test_seq[t];
    prov[r] = {TokenKind::Obs, -1, tslot, seq, seq < 0 ? -1 : test_step0[t] + k - 1};
    payload[r] = test_state(t, k);
  }
  InterleavedTrace tr = make_trace(prov, payload);
  tr.sampled_systems = n;
  tr.slot_pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(t * static_cast<std::size_t>(n)),
                       pairs.begin() + static_cast<std::ptrdiff_t>((t + 1) * static_cast<std::size_t>(n)));
  tr.slot_sequences.assign(
      haystack_seq.begin() + static_cast<std::ptrdiff_t>(t * static_cast<std::size_t>(n)),
      haystack_seq.begin() + static_cast<std::ptrdiff_t>((t + 1) * static_cast<std::size_t>(n)));
  return tr;
}

std::vector<std::size_t> NeedleDataset::decoded_shape() const {
  return {static_cast<std::size_t>(cfg.n_configs), static_cast<std::size_t>(cfg.n_inits),
          static_cast<std::size_t>((cfg.seg_len + 2) * cfg.n_systems + 1),
          static_cast<std::size_t>(kStateDim)};
}

std::vector<double> NeedleDataset::decoded() const {
  const auto shape = decoded_shape();
  const std::size_t rows = shape[2];
  std::vector<double> out(n_traces() * rows * kStateDim, 0.0);
  for (std::size_t t = 0; t < n_traces(); ++t) {
    double* base = out.data() + t * rows * kStateDim;
    for (int j = 0; j < cfg.n_systems; ++j) {
      for (int i = 0; i < cfg.seg_len; ++i) {
        const auto r = static_cast<std::size_t>(segment_open_row(j) + 1 + i);
        const StateVec x = haystack_state(t, j, i);
        for (int d = 0; d < kStateDim; ++d) base[r * kStateDim + static_cast<std::size_t>(d)] = x(d);
      }
    }
    if (cfg.uncut()) {
      // The control's row (L+2)N is the first continuation observation.
      const StateVec x = test_state(t, 1);
      for (int d = 0; d < kStateDim; ++d) {
        base[(rows - 1) * kStateDim + static_cast<std::size_t>(d)] = x(d);
      }
    }
  }
  return out;
}

NeedleDataset build_needle_dataset(const TraceLibrary& lib, const NeedleConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_systems);
  const auto l = static_cast<std::size_t>(cfg.seg_len);
  const std::size_t need_systems = static_cast<std::size_t>(cfg.n_configs - 1) + n;
  if (lib.n_systems < need_systems) {
    throw Error(Errc::InsufficientSystems, "needle dataset needs " + std::to_string(need_systems) +
                                               " systems, library has " +
                                               std::to_string(lib.n_systems));
  }
  if (lib.n_inits < static_cast<std::size_t>(cfg.n_inits)) {
    throw Error(Errc::InsufficientSystems, "needle dataset needs " + std::to_string(cfg.n_inits) +
                                               " initial states per system, library has " +
                                               std::to_string(lib.n_inits));
  }
  if (lib.length < 2 * l) {
    throw Error(Errc::LibraryExhausted, "library sequences shorter than two segments");
  }

  NeedleDataset ds;
  ds.cfg = cfg;
  ds.family = lib.family;
  const std::size_t nt = ds.n_traces();
  ds.pairs.resize(nt * n);
  ds.query_pair.resize(nt);
  ds.haystack_seq.resize(nt * n);
  ds.test_seq.resize(nt);
  ds.test_step0.assign(nt, cfg.seg_len);
  ds.test_slot.assign(nt, static_cast<std::int8_t>(ds.needle_segment()));
  ds.haystack.resize(nt * n * l * kStateDim);
  ds.test.resize(nt * l * kStateDim);

  std::vector<std::int8_t> labels(kLabelPairs);
  for (int c = 0; c < cfg.n_configs; ++c) {
    for (int i = 0; i < cfg.n_inits; ++i) {
      const std::size_t t = ds.trace_index(c, i);
      Rng rng = make_rng(cfg.seed, t);
      std::iota(labels.begin(), labels.end(), std::int8_t{0});
      for (std::size_t j = 0; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, labels.size() - 1);
        std::swap(labels[j], labels[pick(rng)]);
        ds.pairs[t * n + j] = labels[j];
        const std::size_t seq =
            lib.sequence_id(static_cast<std::size_t>(c) + j, static_cast<std::size_t>(i));
        ds.haystack_seq[t * n + j] = static_cast<std::int32_t>(seq);
        for (std::size_t s = 0; s < l; ++s) {
          std::copy_n(lib.state_data(seq, s), kStateDim,
                      ds.haystack_data(t, static_cast<int>(j), static_cast<int>(s)));
        }
      }
      const int needle = ds.needle_segment();
      ds.query_pair[t] = ds.pairs[t * n + static_cast<std::size_t>(needle)];
      const std::int32_t needle_seq = ds.haystack_seq[t * n + static_cast<std::size_t>(needle)];
      ds.test_seq[t] = needle_seq;
      for (int k = 1; k <= cfg.seg_len; ++k) {
        std::copy_n(lib.state_data(static_cast<std::size_t>(needle_seq), l + static_cast<std::size_t>(k - 1)),
                    kStateDim, ds.test_data(t, k));
      }
    }
  }
  return ds;
}

void write_needle_dataset(const NeedleDataset& ds, const std::filesystem::path& path) {
  bin::Writer w;
  w.put_magic(kNeedleMagic);
  w.put<std::uint32_t>(kNeedleVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ds.kind));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ds.family));
  w.put<std::int32_t>(ds.cfg.n_systems);
  w.put<std::int32_t>(ds.cfg.seg_len);
  w.put<std::int32_t>(ds.cfg.n_configs);
  w.put<std::int32_t>(ds.cfg.n_inits);
  w.put<std::int32_t>(ds.cfg.needle_position);
  w.put<std::uint64_t>(ds.cfg.seed);
  w.put<std::int32_t>(ds.swap_segment);
  w.put_array(std::span<const std::int8_t>(ds.pairs));
  w.put_array(std::span<const std::int8_t>(ds.query_pair));
  w.put_array(std::span<const std::int32_t>(ds.haystack_seq));
  w.put_array(std::span<const std::int32_t>(ds.test_seq));
  w.put_array(std::span<const std::int32_t>(ds.test_step0));
  w.put_array(std::span<const std::int8_t>(ds.test_slot));
  w.put_array(std::span<const double>(ds.haystack));
  w.put_array(std::span<const double>(ds.test));
  w.seal();
  bin::write_file_atomic(path, w.bytes());
}

NeedleDataset read_needle_dataset(const std::filesystem::path& path) {
  bin::Reader r(bin::read_file(path), "dataset " + path.string());
  r.verify_seal();
  r.expect_magic(kNeedleMagic);
  if (r.get<std::uint32_t>() != kNeedleVersion) r.fail("unsupported version");
  NeedleDataset ds;
  const auto kind = r.get<std::uint8_t>();
  const auto family = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(OodKind::SeenLabelNewSequence)) r.fail("bad ood kind");
  if (family > static_cast<std::uint8_t>(Family::Identity)) r.fail("bad family");
  ds.kind = static_cast<OodKind>(kind);
  ds.family = static_cast<Family>(family);
  ds.cfg.n_systems = r.get<std::int32_t>();
  ds.cfg.seg_len = r.get<std::int32_t>();
  ds.cfg.n_configs = r.get<std::int32_t>();
  ds.cfg.n_inits = r.get<std::int32_t>();
  ds.cfg.needle_position = r.get<std::int32_t>();
  ds.cfg.seed = r.get<std::uint64_t>();
  ds.swap_segment = r.get<std::int32_t>();
  try {
    ds.cfg.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  const std::size_t nt = ds.n_traces();
  const auto n = static_cast<std::size_t>(ds.cfg.n_systems);
  const auto l = static_cast<std::size_t>(ds.cfg.seg_len);
  if (r.remaining() != nt * (n + 1 + 4 * n + 4 + 4 + 1 + 8 * kStateDim * (n * l + l))) {
    r.fail("payload size does not match header");
  }
  auto read = [&r](auto& v, std::size_t count) {
    v.resize(count);
    r.get_array(std::span(v));
  };
  read(ds.pairs, nt * n);
  read(ds.query_pair, nt);
  read(ds.haystack_seq, nt * n);
  read(ds.test_seq, nt);
  read(ds.test_step0, nt);
  read(ds.test_slot, nt);
  read(ds.haystack, nt * n * l * kStateDim);
  read(ds.test, nt * l * kStateDim);
  return ds;
}

}  // namespace ilts
