#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ilts/dynsys.hpp"

namespace ilts {

enum class LibraryRole : std::uint8_t { Train = 0, Test = 1 };

// Bank of rolled-out state sequences. Sequence s belongs to system
// s / n_inits and uses initial state s % n_inits of that system.
class TraceLibrary {
 public:
  Family family = Family::Orthogonal;
  LibraryRole role = LibraryRole::Train;
  std::uint64_t seed = 0;
  std::size_t n_systems = 0;
  std::size_t n_inits = 0;
  std::size_t length = 0;
  std::vector<SystemMatrix> systems;
  std::vector<StateVec> initial_states;

  std::size_t num_sequences() const { return n_systems * n_inits; }
  std::size_t system_of(std::size_t sequence) const { return sequence / n_inits; }
  std::size_t sequence_id(std::size_t system, std::size_t init) const {
    return system * n_inits + init;
  }

  StateVec state(std::size_t sequence, std::size_t t) const {
    const double* p = states_.data() + (sequence * length + t) * kStateDim;
    return StateVec(p[0], p[1], p[2], p[3], p[4]);
  }
  const double* state_data(std::size_t sequence, std::size_t t) const {
    return states_.data() + (sequence * length + t) * kStateDim;
  }
  StateSequence sequence(std::size_t sequence) const;

  std::vector<double>& raw_states() { return states_; }
  const std::vector<double>& raw_states() const { return states_; }

 private:
  std::vector<double> states_;  // [sequence][t][d]
};

// Draws all system matrices first, then every initial state, then rolls out,
// all from one generator seeded with `seed`.
TraceLibrary build_library(std::size_t n_systems, std::size_t n_inits_per_system,
                           std::size_t length, Family family, std::uint64_t seed);
TraceLibrary build_library(std::size_t n_systems, std::size_t n_inits_per_system,
                           std::size_t length, Family family, std::uint64_t seed,
                           LibraryRole role);

// Binary library file; see docs/formats.md.
void write_library(const TraceLibrary& library, const std::filesystem::path& path);
TraceLibrary read_library(const std::filesystem::path& path);

}  // namespace ilts
