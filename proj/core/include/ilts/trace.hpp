#pragma once

// Token encoding and the interleaved trace container.

#include <cstdint>
#include <span>
#include <vector>

#include "ilts/common.hpp"

namespace ilts {

enum class TokenKind : std::uint8_t { Start = 0, Open = 1, Close = 2, Obs = 3 };

struct Provenance {
  TokenKind kind = TokenKind::Start;
  std::int8_t pair = -1;       // label pair for Open/Close
  std::int8_t slot = -1;       // system slot within the trace (Open/Close/Obs)
  std::int32_t sequence = -1;  // library sequence for Obs (-1 when synthetic)
  std::int32_t step = -1;      // index into that sequence for Obs

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

using TokenRow = Eigen::Matrix<double, 1, kTokenDim>;
using TokenMatrix = RowMatrix<double>;   // T x 57
using TargetMatrix = RowMatrix<double>;  // T x 5

inline constexpr int open_dim(int pair) { return kLabelBase + 2 * pair; }
inline constexpr int close_dim(int pair) { return kLabelBase + 2 * pair + 1; }

// One-hot row for a special symbol. Throws Errc::PairOutOfRange for labels
// outside 0..24, Errc::InvalidArgument for TokenKind::Obs.
TokenRow encode_special(TokenKind kind, int pair = 0);
TokenRow encode_obs(const StateVec& x);
StateVec decode_obs(const TokenRow& row);

struct InterleavedTrace {
  TokenMatrix tokens;
  TargetMatrix targets;
  std::vector<std::uint8_t> loss_mask;
  std::vector<Provenance> provenance;

  // Per-slot metadata: library sequence and label pair of each system slot.
  std::vector<std::int32_t> slot_sequences;
  std::vector<std::int8_t> slot_pairs;
  int sampled_systems = 0;  // N
  int sampled_cuts = 0;     // C, before de-duplication

  int length() const { return static_cast<int>(provenance.size()); }
};

// targets[t] = payload of token t+1 when it is an observation; loss_mask[t]
// marks exactly those positions. The last position is never masked in.
void build_targets_and_mask(InterleavedTrace& trace);

// Writes `kind` rows into `trace.tokens` from provenance plus payloads.
InterleavedTrace make_trace(std::span<const Provenance> provenance,
                            std::span<const StateVec> payloads_per_position);

}  // namespace ilts
