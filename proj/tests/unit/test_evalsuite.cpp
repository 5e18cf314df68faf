#include <gtest/gtest.h>

#include "ilts/evalsuite.hpp"

namespace ilts {
namespace {

class EvalTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(14, 4, kContextLen, Family::Orthogonal, 6, LibraryRole::Test);

  NeedleConfig cfg(int n, int pos = 0) const {
    NeedleConfig c;
    c.n_systems = n;
    c.needle_position = pos;
    c.n_configs = 3;
    c.n_inits = 4;
    return c;
  }
};

TEST_F(EvalTest, UninterleavedRecords) {
  EvalOptions opts;
  opts.examples_seen = 123;
  const auto recs = eval_uninterleaved(PinvPredictor(), lib, 10, 1, opts);
  ASSERT_EQ(recs.size(), 2u * 249);
  EXPECT_EQ(recs.front().index_within_segment, 1);
  EXPECT_EQ(recs[248].index_within_segment, 249);
  EXPECT_EQ(recs.front().checkpoint_examples_seen, 123u);
  for (const auto& r : recs) {
    if (r.index_within_segment >= 8) EXPECT_LE(r.quantiles.q75, 1e-12);
  }
  EXPECT_GT(recs.front().quantiles.q50, 0.1);
  EXPECT_THROW(eval_uninterleaved(PinvPredictor(), lib, 57, 1, opts), Error);
  EXPECT_EQ(eval_uninterleaved(ZeroPredictor(), lib, 4, 1, opts, false).size(), 249u);
}

TEST_F(EvalTest, NeedleRecordsAndRecallCeiling) {
  const NeedleDataset ds = build_needle_dataset(lib, cfg(5, 2));
  const auto recs = eval_needle(PerfectRecallPredictor(), ds);
  ASSERT_EQ(recs.size(), 10u);
  const int idx[] = {1, 2, 3, 7, 8};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(recs[i].eval_kind, EvalKind::NeedleAfterFinal);
    EXPECT_EQ(recs[i].index_within_segment, idx[i]);
    EXPECT_LE(recs[i].quantiles.q75, 1e-12);
    EXPECT_EQ(recs[5 + i].eval_kind, EvalKind::NeedleAfterInitial);
    EXPECT_EQ(recs[i].haystack_size, 5);
    EXPECT_EQ(recs[i].needle_position, 2);
    EXPECT_EQ(recs[i].n_samples, 3u);
  }
  // The first observation of a segment is unpredictable.
  EXPECT_GT(recs[5].quantiles.q50, 0.1);
  EXPECT_LE(recs[8].quantiles.q75, 1e-12);
}

TEST_F(EvalTest, RestartRecords) {
  const NeedleDataset ds = build_needle_dataset(lib, cfg(3));
  const auto recs = eval_restart(PinvPredictor(), ds);
  ASSERT_EQ(recs.size(), 24u);
  EXPECT_EQ(recs[8].segment_position, 1);
  EXPECT_EQ(recs[8].index_within_segment, 1);
  EXPECT_THROW(eval_restart(PinvPredictor(), build_needle_dataset(lib, cfg(2))), Error);
}

TEST_F(EvalTest, PositionSweepEndsWithControl) {
  const auto recs = eval_needle_position_sweep(PerfectRecallPredictor(), lib, cfg(3));
  ASSERT_EQ(recs.size(), 4u * 5);
  EXPECT_EQ(recs[0].needle_position, 0);
  EXPECT_EQ(recs[14].needle_position, 2);
  EXPECT_EQ(recs[15].needle_position, kUncutControl);
  for (const auto& r : recs) EXPECT_LE(r.quantiles.q75, 1e-12);
}

TEST_F(EvalTest, ThreadedErrorsMatchSerial) {
  const NeedleDataset ds = build_needle_dataset(lib, cfg(4, 1));
  std::vector<InterleavedTrace> traces;
  std::vector<std::vector<int>> rows;
  for (std::size_t t = 0; t < ds.n_traces(); ++t) {
    traces.push_back(ds.trace(t));
    rows.push_back({ds.after_final_row(1), ds.after_open_row(0, 3)});
  }
  EXPECT_EQ(squared_errors(PinvPredictor(), traces, rows, 1), squared_errors(PinvPredictor(), traces, rows, 3));
  rows[0][0] = 0;  // next token is an open symbol
  EXPECT_THROW(squared_errors(PinvPredictor(), traces, rows, 2), Error);
}

TEST_F(EvalTest, PretrainLossAgainstBaseline) {
  const TraceLibrary held = build_library(40, 1, kContextLen, Family::Orthogonal, 8);
  const PretrainLoss self = pretrain_loss(PinvPredictor(), held, 20, 3);
  EXPECT_DOUBLE_EQ(self.value, self.baseline);
  EXPECT_GT(self.n_positions, 20u * 100);
  const PretrainLoss zero = pretrain_loss(ZeroPredictor(), held, 20, 3);
  EXPECT_DOUBLE_EQ(zero.baseline, self.baseline);
  EXPECT_NEAR(zero.value, 1.0, 0.15);
  EXPECT_LT(self.value, zero.value);
}

TEST_F(EvalTest, PooledAggregationCountsEverySample) {
  EvalOptions opts;
  opts.aggregation = Aggregation::Pooled;
  const auto recs = eval_needle(ZeroPredictor(), build_needle_dataset(lib, cfg(2)), opts);
  EXPECT_EQ(recs[0].n_samples, 12u);
}

}  // namespace
}  // namespace ilts
