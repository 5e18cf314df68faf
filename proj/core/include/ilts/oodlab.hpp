#pragma once

// Out-of-distribution variants of needle datasets. Each transform returns a
// new dataset that differs from its source only in the rows it names.

#include <optional>

#include "ilts/needle.hpp"

namespace ilts {

// Query open relabelled with the open label of haystack segment
// `wrong_segment`. Defaults to the segment adjacent to the needle (the next
// one, or the previous one when the needle is last). Errc::IndexCollision when
// the wrong segment is the needle (always the case for N = 1).
NeedleDataset make_swap(const NeedleDataset& source, std::optional<int> wrong_segment = std::nullopt);

// Every haystack system is rewound from one shared x10 ~ N(0, I/5) per trace:
// x_i = (U_k^T)^(10-i) x10 for i = 0..9, and the test segment continues the
// needle, x_{10+j} = U_needle^j x10. Errc::FamilyUnsupported for identity
// libraries.
NeedleDataset make_synchronized(const TraceLibrary& test_library, const NeedleConfig& cfg,
                                std::uint64_t seed);

// Query open relabelled with the lowest-numbered label pair unused in the
// trace. Errc::NoFreeLabel when all 25 pairs are in use.
NeedleDataset make_unseen_label(const NeedleDataset& source);

// Test segment replaced by observations 0..L-1 of a system from
// `fresh_library`; trace t uses fresh sequence t % fresh.num_sequences(). The
// query keeps the needle's label. Errc::SystemCollision when a fresh system
// matrix equals one in the trace's haystack.
NeedleDataset make_seen_label_new_sequence(const NeedleDataset& source, const TraceLibrary& fresh_library,
                                           const TraceLibrary& source_library);

// max over traces and haystack segments of |U_k x9 - x10|_2.
double synchronization_residual(const NeedleDataset& dataset, const TraceLibrary& test_library);

}  // namespace ilts
