#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ilts {

// Problem constants. The 57-wide token is laid out as
//   [0]      start symbol
//   [1..50]  label pairs: open_p at 1 + 2p, close_p at 2 + 2p
//   [51]     payload flag
//   [52..56] payload (the 5-dimensional state)
inline constexpr int kStateDim = 5;
inline constexpr int kContextLen = 251;
inline constexpr int kLabelPairs = 25;
inline constexpr int kTokenDim = 57;
inline constexpr int kStartDim = 0;
inline constexpr int kLabelBase = 1;
inline constexpr int kPayloadFlagDim = 51;
inline constexpr int kPayloadBase = 52;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

enum class Errc {
  InvalidArgument,
  Io,
  SingularStack,
  LibraryExhausted,
  PairOutOfRange,
  InvalidDims,
  ShapeMismatch,
  EmptyMask,
  NonFiniteLoss,
  CorruptFile,
  UnknownPreset,
  InsufficientSystems,
  IndexCollision,
  FamilyUnsupported,
  NoFreeLabel,
  SystemCollision,
  UnsupportedArch,
  Diverged,
  GraphMismatch,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Independent child stream seed (splitmix64 over seed and stream index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng{derive_seed(seed, stream)};
}

}  // namespace ilts
