#pragma once

// Needle-in-a-haystack evaluation datasets.
//
// Layout of one trace (L = seg_len, N haystack segments):
//
//   row 0                      start
//   row 1 + (L+2)j             open  (label of segment j)
//   rows 2 + (L+2)j .. +L-1    observations 0..L-1 of segment j's sequence
//   row (L+2)(j+1)             close
//   row (L+2)N + 1             query open (the needle's label)
//   rows (L+2)N + 2 ..         test segment: observations L..2L-1 of the needle
//
// "k-after final" is the prediction emitted at row (query open + k - 1), which
// targets test observation k. "k-after initial" is the prediction at
// (needle open + k - 1), targeting the needle's k-th haystack observation.
//
// In the uncut control (needle_position == kUncutControl) the last haystack
// segment is the needle and simply continues with its next L observations
// instead of closing; there is no query open.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "ilts/library.hpp"
#include "ilts/trace.hpp"

namespace ilts {

enum class OodKind : std::uint8_t {
  None = 0,
  SwapToWrongSeen = 1,
  SynchronizedRotations = 2,
  UnseenLabelMisdirect = 3,
  SeenLabelNewSequence = 4,
};

std::string_view ood_name(OodKind kind);
OodKind parse_ood(std::string_view name);

inline constexpr int kUncutControl = -2;

struct NeedleConfig {
  int n_systems = 5;  // N
  int seg_len = 10;
  int n_configs = 50;
  int n_inits = 1000;
  int needle_position = 0;  // 0..N-1, or kUncutControl
  std::uint64_t seed = 0;   // label assignment

  // Reduced configuration used by tests and default CLI runs.
  static NeedleConfig desk(int n_systems, int needle_position = 0);
  bool uncut() const { return needle_position == kUncutControl; }
  void validate() const;
};

class NeedleDataset {
 public:
  NeedleConfig cfg;
  OodKind kind = OodKind::None;
  Family family = Family::Orthogonal;
  int swap_segment = -1;  // haystack segment whose label the query carries (swap only)

  // Per trace t = config * n_inits + init.
  std::vector<std::int8_t> pairs;          // [t][N] label pair of each haystack segment
  std::vector<std::int8_t> query_pair;     // [t] label on the query open
  std::vector<std::int32_t> haystack_seq;  // [t][N] library sequence, -1 if synthetic
  std::vector<std::int32_t> test_seq;      // [t] sequence feeding the test segment, -1 if synthetic
  std::vector<std::int32_t> test_step0;    // [t] step of the first test observation
  std::vector<std::int8_t> test_slot;      // [t] slot of the test segment (N = unseen system)
  std::vector<double> haystack;            // [t][N][L][5]
  std::vector<double> test;                // [t][L][5]

  int n_systems() const { return cfg.n_systems; }
  int seg_len() const { return cfg.seg_len; }
  std::size_t n_traces() const {
    return static_cast<std::size_t>(cfg.n_configs) * static_cast<std::size_t>(cfg.n_inits);
  }
  std::size_t trace_index(int config, int init) const {
    return static_cast<std::size_t>(config) * static_cast<std::size_t>(cfg.n_inits) +
           static_cast<std::size_t>(init);
  }

  int length() const;
  int needle_segment() const { return cfg.uncut() ? cfg.n_systems - 1 : cfg.needle_position; }
  int segment_open_row(int j) const { return 1 + (cfg.seg_len + 2) * j; }
  int query_open_row() const;  // -1 in the uncut control
  int test_row(int k) const;   // row of test observation k (1-based)
  int after_final_row(int k) const { return test_row(k) - 1; }
  int after_open_row(int segment, int k) const { return segment_open_row(segment) + k - 1; }

  StateVec haystack_state(std::size_t t, int segment, int i) const;
  StateVec test_state(std::size_t t, int k) const;  // 1-based
  double* haystack_data(std::size_t t, int segment, int i);
  double* test_data(std::size_t t, int k);

  InterleavedTrace trace(std::size_t t) const;

  // Start and haystack rows decoded to payloads (zeros on symbol rows), laid
  // out [config][init][row][5] with (L+2)N + 1 rows.
  std::vector<std::size_t> decoded_shape() const;
  std::vector<double> decoded() const;
};

// Config c uses library systems c..c+N-1 in haystack order; init i of each
// system supplies sequence system * library.n_inits + i. Errc::InsufficientSystems
// when the library is too small.
NeedleDataset build_needle_dataset(const TraceLibrary& test_library, const NeedleConfig& cfg);

// Binary dataset file ("ILTD"); see docs/formats.md.
void write_needle_dataset(const NeedleDataset& dataset, const std::filesystem::path& path);
NeedleDataset read_needle_dataset(const std::filesystem::path& path);

}  // namespace ilts
