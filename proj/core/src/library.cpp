#include "ilts/library.hpp"

#include <cmath>
#include <string>

#include "ilts/binary.hpp"

namespace ilts {

namespace {

constexpr std::string_view kLibraryMagic = "ILTS";
constexpr std::uint32_t kLibraryVersion = 1;

void fill_states(TraceLibrary& lib) {
  auto& states = lib.raw_states();
  states.assign(lib.num_sequences() * lib.length * kStateDim, 0.0);
  for (std::size_t s = 0; s < lib.num_sequences(); ++s) {
    const SystemMatrix& u = lib.systems[lib.system_of(s)];
    StateVec x = lib.initial_states[s];
    double* out = states.data() + s * lib.length * kStateDim;
    for (std::size_t t = 0; t < lib.length; ++t) {
      for (int d = 0; d < kStateDim; ++d) out[t * kStateDim + d] = x(d);
      if (u.family == Family::Orthogonal) x = apply(u.entries, x);
    }
  }
}

}  // namespace

StateSequence TraceLibrary::sequence(std::size_t seq) const {
  StateSequence out;
  out.system_id = system_of(seq);
  out.states.reserve(length);
  for (std::size_t t = 0; t < length; ++t) out.states.push_back(state(seq, t));
  return out;
}

TraceLibrary build_library(std::size_t n_systems, std::size_t n_inits_per_system,
                           std::size_t length, Family family, std::uint64_t seed) {
  return build_library(n_systems, n_inits_per_system, length, family, seed,
                       n_inits_per_system > 1 ? LibraryRole::Test : LibraryRole::Train);
}

TraceLibrary build_library(std::size_t n_systems, std::size_t n_inits_per_system,
                           std::size_t length, Family family, std::uint64_t seed,
                           LibraryRole role) {
  if (n_systems == 0 || n_inits_per_system == 0 || length == 0) {
    throw Error(Errc::InvalidArgument, "library dimensions must be positive");
  }
  TraceLibrary lib;
  lib.family = family;
  lib.role = role;
  lib.seed = seed;
  lib.n_systems = n_systems;
  lib.n_inits = n_inits_per_system;
  lib.length = length;

  Rng rng(seed);
  lib.systems.reserve(n_systems);
  for (std::size_t i = 0; i < n_systems; ++i) lib.systems.push_back(sample_system(rng, family));
  lib.initial_states.reserve(lib.num_sequences());
  for (std::size_t i = 0; i < lib.num_sequences(); ++i) {
    lib.initial_states.push_back(sample_initial_state(rng));
  }
  fill_states(lib);
  return lib;
}

void write_library(const TraceLibrary& lib, const std::filesystem::path& path) {
  bin::Writer w;
  w.put_magic(kLibraryMagic);
  w.put<std::uint32_t>(kLibraryVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(lib.family));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lib.n_systems));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lib.n_inits));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lib.length));
  w.put<std::uint32_t>(kStateDim);
  w.put<std::uint64_t>(lib.seed);
  for (const auto& u : lib.systems) {
    for (int r = 0; r < kStateDim; ++r) {
      for (int c = 0; c < kStateDim; ++c) w.put<double>(u.entries(r, c));
    }
  }
  for (double v : lib.raw_states()) w.put<float>(static_cast<float>(v));
  // Extension block: role and the exact f64 initial states, so readers can
  // reproduce the f64 rollouts that the f32 block was rounded from.
  w.put<std::uint8_t>(static_cast<std::uint8_t>(lib.role));
  for (const auto& x : lib.initial_states) {
    for (int d = 0; d < kStateDim; ++d) w.put<double>(x(d));
  }
  w.seal();
  bin::write_file_atomic(path, w.bytes());
}

TraceLibrary read_library(const std::filesystem::path& path) {
  bin::Reader r(bin::read_file(path), "library " + path.string());
  r.verify_seal();
  r.expect_magic(kLibraryMagic);
  if (r.get<std::uint32_t>() != kLibraryVersion) r.fail("unsupported version");
  TraceLibrary lib;
  const auto fam = r.get<std::uint8_t>();
  if (fam > 1) r.fail("bad family tag");
  lib.family = static_cast<Family>(fam);
  lib.n_systems = r.get<std::uint32_t>();
  lib.n_inits = r.get<std::uint32_t>();
  lib.length = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != kStateDim) r.fail("state dimension must be 5");
  lib.seed = r.get<std::uint64_t>();
  if (lib.n_systems == 0 || lib.n_inits == 0 || lib.length == 0) r.fail("empty library");

  const std::size_t n_seq = lib.num_sequences();
  const std::size_t need = lib.n_systems * 25 * 8 + n_seq * lib.length * kStateDim * 4 + 1 +
                           n_seq * kStateDim * 8;
  if (r.remaining() != need) r.fail("size does not match header");

  lib.systems.resize(lib.n_systems);
  for (auto& u : lib.systems) {
    u.family = lib.family;
    for (int row = 0; row < kStateDim; ++row) {
      for (int c = 0; c < kStateDim; ++c) u.entries(row, c) = r.get<double>();
    }
  }
  std::vector<float> f32(n_seq * lib.length * kStateDim);
  r.get_array(std::span<float>(f32));
  const auto role = r.get<std::uint8_t>();
  if (role > 1) r.fail("bad role tag");
  lib.role = static_cast<LibraryRole>(role);
  lib.initial_states.resize(n_seq);
  for (auto& x : lib.initial_states) {
    for (int d = 0; d < kStateDim; ++d) x(d) = r.get<double>();
  }
  fill_states(lib);
  const auto& states = lib.raw_states();
  for (std::size_t i = 0; i < f32.size(); ++i) {
    if (static_cast<float>(states[i]) != f32[i]) r.fail("f32 sequence block disagrees with rollout");
  }
  return lib;
}

}  // namespace ilts
