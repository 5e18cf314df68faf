#include <gtest/gtest.h>

#include "ilts/oodlab.hpp"

namespace ilts {
namespace {

std::vector<int> differing_rows(const InterleavedTrace& a, const InterleavedTrace& b) {
  std::vector<int> rows;
  for (int r = 0; r < a.length(); ++r) {
    if (a.tokens.row(r) != b.tokens.row(r)) rows.push_back(r);
  }
  return rows;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

class OodTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(12, 4, 30, Family::Orthogonal, 8, LibraryRole::Test);
  TraceLibrary fresh = build_library(6, 2, 30, Family::Orthogonal, 99, LibraryRole::Test);

  NeedleConfig cfg(int n, int pos) const {
    NeedleConfig c;
    c.n_systems = n;
    c.needle_position = pos;
    c.n_configs = 3;
    c.n_inits = 4;
    return c;
  }
};

TEST_F(OodTest, SwapChangesOnlyQueryLabel) {
  const NeedleDataset src = build_needle_dataset(lib, cfg(4, 1));
  const NeedleDataset swp = make_swap(src);
  EXPECT_EQ(swp.swap_segment, 2);
  for (std::size_t t = 0; t < src.n_traces(); ++t) {
    EXPECT_EQ(differing_rows(src.trace(t), swp.trace(t)), std::vector<int>{src.query_open_row()});
    EXPECT_EQ(swp.query_pair[t], src.pairs[t * 4 + 2]);
  }
  const NeedleDataset last = build_needle_dataset(lib, cfg(4, 3));
  EXPECT_EQ(make_swap(last).swap_segment, 2);
  EXPECT_EQ(make_swap(src, 0).swap_segment, 0);
  EXPECT_EQ(code_of([&] { make_swap(src, 1); }), Errc::IndexCollision);
  EXPECT_EQ(code_of([&] { make_swap(build_needle_dataset(lib, cfg(1, 0))); }), Errc::IndexCollision);
}

TEST_F(OodTest, UnseenLabelIsLowestFreePair) {
  const NeedleDataset src = build_needle_dataset(lib, cfg(5, 0));
  const NeedleDataset out = make_unseen_label(src);
  for (std::size_t t = 0; t < src.n_traces(); ++t) {
    EXPECT_EQ(differing_rows(src.trace(t), out.trace(t)), std::vector<int>{src.query_open_row()});
    int expect = 0;
    while (std::find(src.pairs.begin() + static_cast<std::ptrdiff_t>(t * 5),
                     src.pairs.begin() + static_cast<std::ptrdiff_t>(t * 5 + 5), expect) !=
           src.pairs.begin() + static_cast<std::ptrdiff_t>(t * 5 + 5)) {
      ++expect;
    }
    EXPECT_EQ(out.query_pair[t], expect);
  }
  const TraceLibrary big = build_library(25, 1, 30, Family::Orthogonal, 1);
  NeedleConfig full = cfg(25, 0);
  full.n_configs = 1;
  full.n_inits = 1;
  EXPECT_EQ(code_of([&] { make_unseen_label(build_needle_dataset(big, full)); }), Errc::NoFreeLabel);
}

TEST_F(OodTest, SeenLabelNewSequenceReplacesTestRows) {
  const NeedleDataset src = build_needle_dataset(lib, cfg(3, 2));
  const NeedleDataset out = make_seen_label_new_sequence(src, fresh, lib);
  for (std::size_t t = 0; t < src.n_traces(); ++t) {
    std::vector<int> expect;
    for (int k = 1; k <= 10; ++k) expect.push_back(src.test_row(k));
    EXPECT_EQ(differing_rows(src.trace(t), out.trace(t)), expect);
    EXPECT_EQ(out.query_pair[t], src.query_pair[t]);
    EXPECT_EQ(out.test_state(t, 1), fresh.state(t % fresh.num_sequences(), 0));
    EXPECT_EQ(out.test_slot[t], 3);
  }
  EXPECT_EQ(code_of([&] { make_seen_label_new_sequence(src, lib, lib); }), Errc::SystemCollision);
}

TEST_F(OodTest, SynchronizedRotationsShareTheTenthState) {
  const NeedleDataset ds = make_synchronized(lib, cfg(4, 1), 3);
  EXPECT_LE(synchronization_residual(ds, lib), 1e-12);
  for (std::size_t t = 0; t < ds.n_traces(); ++t) {
    const int c = static_cast<int>(t / 4);
    const StateMat& u = lib.systems[static_cast<std::size_t>(c + 1)].entries;
    for (int k = 1; k < 10; ++k) EXPECT_LT((u * ds.test_state(t, k) - ds.test_state(t, k + 1)).norm(), 1e-12);
    for (int j = 0; j < 4; ++j) {
      const StateMat& uj = lib.systems[static_cast<std::size_t>(c + j)].entries;
      for (int s = 0; s < 9; ++s) {
        EXPECT_LT((uj * ds.haystack_state(t, j, s) - ds.haystack_state(t, j, s + 1)).norm(), 1e-12);
      }
    }
  }
  // Different traces draw different shared states.
  EXPECT_NE(ds.test_state(0, 1), ds.test_state(1, 1));
  const TraceLibrary ident = build_library(12, 4, 30, Family::Identity, 8);
  EXPECT_EQ(code_of([&] { make_synchronized(ident, cfg(2, 0), 1); }), Errc::FamilyUnsupported);
}

TEST_F(OodTest, UncutControlRejected) {
  const NeedleDataset ctl = build_needle_dataset(lib, cfg(3, kUncutControl));
  EXPECT_THROW(make_swap(ctl), Error);
  EXPECT_THROW(make_unseen_label(ctl), Error);
}

}  // namespace
}  // namespace ilts
