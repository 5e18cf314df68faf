#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "ilts/interleave.hpp"
#include "../support/stats.hpp"

namespace ilts {
namespace {

namespace fs = std::filesystem;

TEST(Zipf, PmfMatchesDirectSum) {
  const auto pmf = zipf_pmf(1.5, 25);
  ASSERT_EQ(pmf.size(), 25u);
  EXPECT_NEAR(pmf[0], 0.451195256343273367, 1e-15);
  EXPECT_NEAR(pmf[1], 0.159521612699765610, 1e-15);
  EXPECT_NEAR(pmf[24], 0.003609562050746187, 1e-16);
  double mean = 0.0;
  for (int k = 1; k <= 25; ++k) mean += k * pmf[static_cast<std::size_t>(k - 1)];
  EXPECT_NEAR(mean, 3.898016678724714177, 1e-13);
}

TEST(Plan, NumSystemsFollowsZipf) {
  GenConfig cfg;
  std::vector<double> counts(25, 0.0);
  for (std::uint64_t i = 0; i < 50000; ++i) {
    Rng rng = make_rng(77, i);
    counts[static_cast<std::size_t>(sample_num_systems(rng, cfg) - 1)] += 1.0;
  }
  EXPECT_GT(test::chi_square(counts, zipf_pmf(1.5, 25)).p_value, 1e-4);
}

TEST(Plan, CutsMatchPoissonMixture) {
  GenConfig cfg;
  const auto z = zipf_pmf(1.5, 25);
  std::vector<double> probs(200, 0.0), counts(200, 0.0);
  for (int k = 0; k < 200; ++k) {
    for (int n = 1; n <= 25; ++n) probs[static_cast<std::size_t>(k)] += z[static_cast<std::size_t>(n - 1)] * test::poisson_pmf(k, 2.0 * n);
  }
  EXPECT_NEAR(probs[0], 0.0642205779567728493, 1e-15);
  EXPECT_NEAR(probs[2], 0.1500863997281792332, 1e-15);
  EXPECT_NEAR(probs[10], 0.0209767522104446691, 1e-15);
  for (std::uint64_t i = 0; i < 50000; ++i) {
    Rng rng = make_rng(78, i);
    counts[static_cast<std::size_t>(plan_trace(rng, cfg).num_cuts)] += 1.0;
  }
  EXPECT_GT(test::chi_square(counts, probs).p_value, 1e-4);
}

TEST(Plan, SegmentsTileTheContext) {
  GenConfig cfg;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    Rng rng = make_rng(5, i);
    const TracePlan plan = plan_trace(rng, cfg);
    ASSERT_FALSE(plan.segments.empty());
    EXPECT_EQ(plan.segments.front().first, 1);
    EXPECT_EQ(plan.segments.back().last, cfg.context_len - 1);
    for (std::size_t s = 1; s < plan.segments.size(); ++s) {
      EXPECT_EQ(plan.segments[s].first, plan.segments[s - 1].last + 1);
    }
    std::set<int> distinct(plan.cuts.begin(), plan.cuts.end());
    distinct.insert(1);
    EXPECT_EQ(plan.segments.size(), distinct.size());
    std::set<int> labels(plan.slot_pairs.begin(), plan.slot_pairs.end());
    EXPECT_EQ(static_cast<int>(labels.size()), plan.num_systems);
    for (int p : labels) EXPECT_TRUE(p >= 0 && p < kLabelPairs);
  }
}

TEST(Plan, ZipfCapAboveLabelsRejected) {
  GenConfig cfg;
  cfg.zipf_cap = 26;
  Rng rng(0);
  EXPECT_THROW(plan_trace(rng, cfg), Error);
}

class InterleaveTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(60, 1, kContextLen, Family::Orthogonal, 3);
};

TEST_F(InterleaveTest, TracesAreConsistent) {
  const auto traces = interleave_batch(lib, 12, 0, 400);
  for (const auto& tr : traces) {
    ASSERT_EQ(tr.length(), kContextLen);
    EXPECT_EQ(tr.provenance[0].kind, TokenKind::Start);
    EXPECT_EQ(tr.provenance.back().kind, TokenKind::Close);
    std::vector<int> next_step(static_cast<std::size_t>(tr.sampled_systems), 0);
    int open_slot = -1;
    for (int t = 1; t < tr.length(); ++t) {
      const Provenance& p = tr.provenance[static_cast<std::size_t>(t)];
      switch (p.kind) {
        case TokenKind::Open:
          EXPECT_EQ(open_slot, -1);
          open_slot = p.slot;
          EXPECT_EQ(p.pair, tr.slot_pairs[static_cast<std::size_t>(p.slot)]);
          break;
        case TokenKind::Close:
          if (open_slot != -1) EXPECT_EQ(p.slot, open_slot);
          EXPECT_EQ(p.pair, tr.slot_pairs[static_cast<std::size_t>(p.slot)]);
          open_slot = -1;
          break;
        case TokenKind::Obs: {
          EXPECT_EQ(p.slot, open_slot);
          EXPECT_EQ(p.sequence, tr.slot_sequences[static_cast<std::size_t>(p.slot)]);
          EXPECT_EQ(p.step, next_step[static_cast<std::size_t>(p.slot)]++);
          const StateVec x = decode_obs(tr.tokens.row(t));
          EXPECT_EQ(x, lib.state(static_cast<std::size_t>(p.sequence), static_cast<std::size_t>(p.step)));
          break;
        }
        case TokenKind::Start: ADD_FAILURE() << "start symbol inside trace";
      }
    }
  }
}

TEST_F(InterleaveTest, MaskMarksRowsBeforeObservations) {
  for (const auto& tr : interleave_batch(lib, 4, 0, 50)) {
    for (int t = 0; t < tr.length(); ++t) {
      const bool next_obs = t + 1 < tr.length() && tr.tokens(t + 1, kPayloadFlagDim) == 1.0;
      EXPECT_EQ(tr.loss_mask[static_cast<std::size_t>(t)] != 0, next_obs);
      if (next_obs) {
        EXPECT_EQ(tr.targets.row(t), tr.tokens.row(t + 1).segment(kPayloadBase, kStateDim));
      }
    }
  }
}

TEST_F(InterleaveTest, BatchIsReproducibleAndIndexed) {
  const auto a = interleave_batch(lib, 9, 0, 6);
  const auto b = interleave_batch(lib, 9, 4, 2);
  EXPECT_EQ(a[4].tokens, b[0].tokens);
  EXPECT_EQ(a[5].provenance, b[1].provenance);
  EXPECT_NE(a[0].tokens, a[1].tokens);
}

TEST_F(InterleaveTest, TraceFileRoundTrip) {
  const fs::path path = fs::temp_directory_path() / ("ilts_traces_" + std::to_string(::getpid()));
  const auto traces = interleave_batch(lib, 2, 0, 5);
  write_traces(traces, 2, path);
  std::uint64_t seed = 0;
  const auto back = read_traces(path, &seed);
  EXPECT_EQ(seed, 2u);
  ASSERT_EQ(back.size(), traces.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].tokens, traces[i].tokens);
    EXPECT_EQ(back[i].loss_mask, traces[i].loss_mask);
    EXPECT_EQ(back[i].provenance, traces[i].provenance);
  }
  fs::remove(path);
}

TEST(Interleave, ShortLibraryIsExhausted) {
  const TraceLibrary lib = build_library(1, 1, 20, Family::Identity, 0);
  Rng rng(1);
  try {
    interleave(lib, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::LibraryExhausted || e.code() == Errc::InsufficientSystems);
  }
}

TEST(Encoding, SpecialSymbolLayout) {
  EXPECT_EQ(encode_special(TokenKind::Start)(0), 1.0);
  EXPECT_EQ(encode_special(TokenKind::Open, 0)(1), 1.0);
  EXPECT_EQ(encode_special(TokenKind::Close, 0)(2), 1.0);
  EXPECT_EQ(encode_special(TokenKind::Open, 24)(49), 1.0);
  EXPECT_EQ(encode_special(TokenKind::Close, 24)(50), 1.0);
  EXPECT_EQ(encode_special(TokenKind::Close, 24).sum(), 1.0);
  const StateVec x(1, 2, 3, 4, 5);
  const TokenRow row = encode_obs(x);
  EXPECT_EQ(row(kPayloadFlagDim), 1.0);
  EXPECT_EQ(decode_obs(row), x);
  try {
    encode_special(TokenKind::Open, 25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PairOutOfRange);
  }
  EXPECT_THROW(encode_special(TokenKind::Obs), Error);
}

}  // namespace
}  // namespace ilts
