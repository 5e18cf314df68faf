#include <gtest/gtest.h>

#include "ilts/evalsuite.hpp"
#include "ilts/oodlab.hpp"

namespace ilts {
namespace {

class PredictorTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(12, 3, kContextLen, Family::Orthogonal, 4, LibraryRole::Test);

  NeedleDataset needle(int n, int pos) const {
    NeedleConfig c;
    c.n_systems = n;
    c.needle_position = pos;
    c.n_configs = 2;
    c.n_inits = 3;
    return build_needle_dataset(lib, c);
  }

  static std::vector<int> all_rows(const InterleavedTrace& tr) {
    std::vector<int> r(static_cast<std::size_t>(tr.length()));
    std::iota(r.begin(), r.end(), 0);
    return r;
  }
};

TEST_F(PredictorTest, ZeroPredictsPriorMean) {
  const auto tr = uninterleaved_traces(lib, 2, 1);
  const std::vector<std::vector<int>> rows = {{0, 5, 9}, {3}};
  const auto out = ZeroPredictor().predict(tr, rows);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].rows(), 3);
  EXPECT_EQ(out[0].cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(PredictorTest, PinvOnUninterleavedMatchesDirectHistory) {
  const auto traces = uninterleaved_traces(lib, 3, 2);
  const std::vector<std::vector<int>> rows(3, {1, 2, 3, 7, 40, 249});
  const auto out = PinvPredictor().predict(traces, rows);
  for (std::size_t i = 0; i < 3; ++i) {
    const StateSequence seq = lib.sequence(i);
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const int k = rows[i][j];
      const StateVec expect = pinv_predict(std::span(seq.states).first(static_cast<std::size_t>(k - 1)));
      EXPECT_LT((out[i].row(static_cast<Eigen::Index>(j)).transpose() - expect).norm(), 1e-13);
    }
  }
}

TEST_F(PredictorTest, PinvFollowsLabelsAndRecallIsExact) {
  const NeedleDataset ds = needle(4, 1);
  std::vector<InterleavedTrace> traces;
  std::vector<std::vector<int>> rows;
  for (std::size_t t = 0; t < ds.n_traces(); ++t) {
    traces.push_back(ds.trace(t));
    rows.push_back({0, ds.after_final_row(1), ds.after_final_row(5), ds.segment_open_row(2) + 11});
  }
  const auto pinv = PinvPredictor().predict(traces, rows);
  const auto recall = PerfectRecallPredictor().predict(traces, rows);
  for (std::size_t t = 0; t < traces.size(); ++t) {
    // Nothing open at the start or right after a close.
    EXPECT_EQ(pinv[t].row(0).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(pinv[t].row(3).cwiseAbs().maxCoeff(), 0.0);
    for (int j : {1, 2}) {
      const int k = j == 1 ? 1 : 5;
      EXPECT_LE((pinv[t].row(j).transpose() - ds.test_state(t, k)).squaredNorm(), 1e-12);
      EXPECT_LE((recall[t].row(j).transpose() - ds.test_state(t, k)).squaredNorm(), 1e-12);
    }
  }
}

TEST_F(PredictorTest, SwapMisleadsPinvButNotRecall) {
  const NeedleDataset ds = make_swap(needle(3, 0));
  const std::vector<InterleavedTrace> traces = {ds.trace(0)};
  const std::vector<std::vector<int>> rows = {{ds.after_final_row(1)}};
  const double pinv = (PinvPredictor().predict(traces, rows)[0].row(0).transpose() - ds.test_state(0, 1)).squaredNorm();
  const double recall =
      (PerfectRecallPredictor().predict(traces, rows)[0].row(0).transpose() - ds.test_state(0, 1)).squaredNorm();
  EXPECT_GT(pinv, 1e-3);
  EXPECT_LE(recall, 1e-12);
}

TEST_F(PredictorTest, RecallHasNoHistoryForUnseenSystem) {
  const TraceLibrary fresh = build_library(4, 1, 30, Family::Orthogonal, 77);
  const NeedleDataset ds = make_seen_label_new_sequence(needle(2, 0), fresh, lib);
  const std::vector<InterleavedTrace> traces = {ds.trace(1)};
  const std::vector<std::vector<int>> rows = {{ds.after_final_row(1), ds.after_final_row(2)}};
  const auto out = PerfectRecallPredictor().predict(traces, rows);
  EXPECT_EQ(out[0].row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out[0].row(1).cwiseAbs().maxCoeff(), 0.0);  // one observation: prior mean
}

TEST_F(PredictorTest, ModelPredictorMatchesForward) {
  const Transformer<float> model(ModelConfig::preset(SizePreset::Tiny), 1);
  const auto traces = uninterleaved_traces(lib, 3, 5);
  const std::vector<std::vector<int>> rows = {{1, 2}, {100}, {0, 249, 17}};
  const auto out = ModelPredictor(model, 2).predict(traces, rows);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ad::Matrix<float> full = model.predict(traces[i].tokens.cast<float>(), 1, kContextLen);
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const auto r = static_cast<Eigen::Index>(rows[i][j]);
      EXPECT_LT((out[i].row(static_cast<Eigen::Index>(j)) - full.row(r).cast<double>()).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST_F(PredictorTest, RejectsBadRows) {
  const auto traces = uninterleaved_traces(lib, 1, 5);
  const std::vector<std::vector<int>> bad = {{kContextLen}};
  EXPECT_THROW(PinvPredictor().predict(traces, bad), Error);
  const std::vector<std::vector<int>> two = {{1}, {1}};
  EXPECT_THROW(ZeroPredictor().predict(traces, two), Error);
}

}  // namespace
}  // namespace ilts
