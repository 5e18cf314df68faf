#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "ilts/needle.hpp"

namespace ilts {
namespace {

namespace fs = std::filesystem;

NeedleConfig small_cfg(int n, int pos = 0) {
  NeedleConfig c;
  c.n_systems = n;
  c.needle_position = pos;
  c.n_configs = 4;
  c.n_inits = 3;
  c.seed = 5;
  return c;
}

class NeedleTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(30, 3, 40, Family::Orthogonal, 2, LibraryRole::Test);
};

TEST_F(NeedleTest, RowLayout) {
  const NeedleDataset ds = build_needle_dataset(lib, small_cfg(3, 1));
  EXPECT_EQ(ds.length(), 12 * 3 + 12);
  EXPECT_EQ(ds.segment_open_row(0), 1);
  EXPECT_EQ(ds.segment_open_row(2), 25);
  EXPECT_EQ(ds.query_open_row(), 37);
  EXPECT_EQ(ds.test_row(1), 38);
  EXPECT_EQ(ds.after_final_row(1), 37);
  EXPECT_EQ(ds.after_open_row(1, 1), 13);

  const InterleavedTrace tr = ds.trace(4);
  EXPECT_EQ(tr.provenance[0].kind, TokenKind::Start);
  for (int j = 0; j < 3; ++j) {
    const int open = ds.segment_open_row(j);
    EXPECT_EQ(tr.provenance[static_cast<std::size_t>(open)].kind, TokenKind::Open);
    EXPECT_EQ(tr.provenance[static_cast<std::size_t>(open + 11)].kind, TokenKind::Close);
    EXPECT_EQ(tr.provenance[static_cast<std::size_t>(open)].pair, ds.pairs[4 * 3 + static_cast<std::size_t>(j)]);
  }
  EXPECT_EQ(tr.provenance[37].pair, ds.pairs[4 * 3 + 1]);
  for (int k = 1; k <= 10; ++k) {
    EXPECT_TRUE(tr.loss_mask[static_cast<std::size_t>(ds.after_final_row(k))]);
    EXPECT_EQ(decode_obs(tr.tokens.row(ds.test_row(k))), ds.test_state(4, k));
  }
  std::set<int> labels(ds.pairs.begin() + 12, ds.pairs.begin() + 15);
  EXPECT_EQ(labels.size(), 3u);
}

TEST_F(NeedleTest, SystemsAndInitsAssignment) {
  const NeedleDataset ds = build_needle_dataset(lib, small_cfg(5, 4));
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 3; ++i) {
      const std::size_t t = ds.trace_index(c, i);
      for (int j = 0; j < 5; ++j) {
        const auto seq = static_cast<std::size_t>(ds.haystack_seq[t * 5 + static_cast<std::size_t>(j)]);
        EXPECT_EQ(seq, lib.sequence_id(static_cast<std::size_t>(c + j), static_cast<std::size_t>(i)));
        for (int s = 0; s < 10; ++s) EXPECT_EQ(ds.haystack_state(t, j, s), lib.state(seq, static_cast<std::size_t>(s)));
      }
      // Test segment continues the needle: rollout states 10..19.
      const auto needle = static_cast<std::size_t>(ds.test_seq[t]);
      EXPECT_EQ(needle, static_cast<std::size_t>(ds.haystack_seq[t * 5 + 4]));
      for (int k = 1; k <= 10; ++k) EXPECT_EQ(ds.test_state(t, k), lib.state(needle, static_cast<std::size_t>(9 + k)));
    }
  }
}

TEST_F(NeedleTest, UncutControlContinuesLastSegment) {
  NeedleConfig cfg = small_cfg(3, kUncutControl);
  const NeedleDataset ds = build_needle_dataset(lib, cfg);
  EXPECT_EQ(ds.length(), 12 * 3 + 10);
  EXPECT_EQ(ds.query_open_row(), -1);
  EXPECT_EQ(ds.needle_segment(), 2);
  EXPECT_EQ(ds.test_row(1), 36);
  const InterleavedTrace tr = ds.trace(0);
  for (int r = ds.segment_open_row(2) + 1; r < ds.length(); ++r) {
    EXPECT_EQ(tr.provenance[static_cast<std::size_t>(r)].kind, TokenKind::Obs);
    EXPECT_EQ(tr.provenance[static_cast<std::size_t>(r)].step, r - ds.segment_open_row(2) - 1);
  }
  const auto dec = ds.decoded();
  const std::size_t rows = ds.decoded_shape()[2];
  EXPECT_EQ(rows, 37u);
  EXPECT_EQ(dec[(rows - 1) * 5], ds.test_state(0, 1)(0));
}

TEST_F(NeedleTest, DecodedTensor) {
  for (int n : {1, 2, 5}) {
    const NeedleDataset ds = build_needle_dataset(lib, small_cfg(n));
    const auto shape = ds.decoded_shape();
    EXPECT_EQ(shape, (std::vector<std::size_t>{4, 3, static_cast<std::size_t>(12 * n + 1), 5}));
    const auto dec = ds.decoded();
    ASSERT_EQ(dec.size(), 4u * 3 * (12 * n + 1) * 5);
    const std::size_t t = ds.trace_index(2, 1);
    const double* base = dec.data() + t * shape[2] * 5;
    const InterleavedTrace tr = ds.trace(t);
    for (std::size_t r = 0; r < shape[2]; ++r) {
      for (int d = 0; d < 5; ++d) EXPECT_EQ(base[r * 5 + static_cast<std::size_t>(d)], tr.tokens(static_cast<Eigen::Index>(r), kPayloadBase + d));
    }
  }
  NeedleDataset full;
  full.cfg.n_systems = 19;
  EXPECT_EQ(full.decoded_shape(), (std::vector<std::size_t>{50, 1000, 229, 5}));
}

TEST_F(NeedleTest, Errors) {
  auto code = [&](const NeedleConfig& c) {
    try {
      build_needle_dataset(lib, c);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  NeedleConfig c = small_cfg(5);
  c.n_configs = 27;
  EXPECT_EQ(code(c), Errc::InsufficientSystems);
  c = small_cfg(5);
  c.n_inits = 4;
  EXPECT_EQ(code(c), Errc::InsufficientSystems);
  EXPECT_EQ(code(small_cfg(26)), Errc::InvalidArgument);
  EXPECT_EQ(code(small_cfg(3, 3)), Errc::InvalidArgument);
  const TraceLibrary short_lib = build_library(10, 3, 15, Family::Orthogonal, 1);
  try {
    build_needle_dataset(short_lib, small_cfg(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LibraryExhausted);
  }
}

TEST_F(NeedleTest, LabelsDeterministicInSeed) {
  const NeedleDataset a = build_needle_dataset(lib, small_cfg(4));
  const NeedleDataset b = build_needle_dataset(lib, small_cfg(4));
  NeedleConfig other = small_cfg(4);
  other.seed = 6;
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_NE(a.pairs, build_needle_dataset(lib, other).pairs);
}

TEST_F(NeedleTest, FileRoundTrip) {
  const fs::path path = fs::temp_directory_path() / ("ilts_needle_" + std::to_string(::getpid()) + ".iltd");
  const NeedleDataset ds = build_needle_dataset(lib, small_cfg(2, 1));
  write_needle_dataset(ds, path);
  const NeedleDataset back = read_needle_dataset(path);
  EXPECT_EQ(back.pairs, ds.pairs);
  EXPECT_EQ(back.haystack, ds.haystack);
  EXPECT_EQ(back.test, ds.test);
  EXPECT_EQ(back.cfg.needle_position, 1);
  EXPECT_EQ(back.trace(3).tokens, ds.trace(3).tokens);
  fs::remove(path);
}

TEST(NeedleNames, OodKindRoundTrip) {
  for (auto k : {OodKind::None, OodKind::SwapToWrongSeen, OodKind::SynchronizedRotations,
                 OodKind::UnseenLabelMisdirect, OodKind::SeenLabelNewSequence}) {
    EXPECT_EQ(parse_ood(ood_name(k)), k);
  }
  EXPECT_THROW(parse_ood("rotate"), Error);
}

}  // namespace
}  // namespace ilts
