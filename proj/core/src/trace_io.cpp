#include <string>

#include "ilts/binary.hpp"
#include "ilts/interleave.hpp"

namespace ilts {

namespace {
constexpr std::string_view kTraceMagic = "ILTB";
constexpr std::uint32_t kTraceVersion = 1;
}  // namespace

void write_traces(const std::vector<InterleavedTrace>& traces, std::uint64_t seed,
                  const std::filesystem::path& path) {
  bin::Writer w;
  w.put_magic(kTraceMagic);
  w.put<std::uint32_t>(kTraceVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(traces.size()));
  w.put<std::uint32_t>(kTokenDim);
  w.put<std::uint32_t>(kStateDim);
  w.put<std::uint64_t>(seed);
  for (const auto& tr : traces) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.length()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(tr.sampled_systems));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.sampled_cuts));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(tr.slot_sequences.size()));
    w.put_array(std::span<const std::int32_t>(tr.slot_sequences));
    w.put_array(std::span<const std::int8_t>(tr.slot_pairs));
    for (const auto& p : tr.provenance) {
      w.put<std::uint8_t>(static_cast<std::uint8_t>(p.kind));
      w.put<std::int8_t>(p.pair);
      w.put<std::int8_t>(p.slot);
      w.put<std::uint8_t>(0);
      w.put<std::int32_t>(p.sequence);
      w.put<std::int32_t>(p.step);
    }
    w.put_array(std::span<const double>(tr.tokens.data(), static_cast<std::size_t>(tr.tokens.size())));
  }
  w.seal();
  bin::write_file_atomic(path, w.bytes());
}

std::vector<InterleavedTrace> read_traces(const std::filesystem::path& path, std::uint64_t* seed_out) {
  bin::Reader r(bin::read_file(path), "trace batch " + path.string());
  r.verify_seal();
  r.expect_magic(kTraceMagic);
  if (r.get<std::uint32_t>() != kTraceVersion) r.fail("unsupported version");
  const auto n = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != kTokenDim || r.get<std::uint32_t>() != kStateDim) {
    r.fail("unexpected token layout");
  }
  const auto seed = r.get<std::uint64_t>();
  if (seed_out) *seed_out = seed;
  std::vector<InterleavedTrace> traces(n);
  for (auto& tr : traces) {
    const auto len = r.get<std::uint32_t>();
    tr.sampled_systems = r.get<std::uint8_t>();
    tr.sampled_cuts = static_cast<int>(r.get<std::uint32_t>());
    const auto slots = r.get<std::uint8_t>();
    tr.slot_sequences.resize(slots);
    tr.slot_pairs.resize(slots);
    r.get_array(std::span<std::int32_t>(tr.slot_sequences));
    r.get_array(std::span<std::int8_t>(tr.slot_pairs));
    tr.provenance.resize(len);
    for (auto& p : tr.provenance) {
      const auto kind = r.get<std::uint8_t>();
      if (kind > 3) r.fail("bad token kind");
      p.kind = static_cast<TokenKind>(kind);
      p.pair = r.get<std::int8_t>();
      p.slot = r.get<std::int8_t>();
      (void)r.get<std::uint8_t>();
      p.sequence = r.get<std::int32_t>();
      p.step = r.get<std::int32_t>();
    }
    tr.tokens.resize(len, kTokenDim);
    r.get_array(std::span<double>(tr.tokens.data(), static_cast<std::size_t>(tr.tokens.size())));
    build_targets_and_mask(tr);
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return traces;
}

}  // namespace ilts
