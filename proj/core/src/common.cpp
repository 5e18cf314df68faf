#include "ilts/common.hpp"

namespace ilts {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::SingularStack: return "SingularStack";
    case Errc::LibraryExhausted: return "LibraryExhausted";
    case Errc::PairOutOfRange: return "PairOutOfRange";
    case Errc::InvalidDims: return "InvalidDims";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::InsufficientSystems: return "InsufficientSystems";
    case Errc::IndexCollision: return "IndexCollision";
    case Errc::FamilyUnsupported: return "FamilyUnsupported";
    case Errc::NoFreeLabel: return "NoFreeLabel";
    case Errc::SystemCollision: return "SystemCollision";
    case Errc::UnsupportedArch: return "UnsupportedArch";
    case Errc::Diverged: return "Diverged";
    case Errc::GraphMismatch: return "GraphMismatch";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ilts
