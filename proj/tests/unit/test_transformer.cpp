#include <gtest/gtest.h>

#include "ilts/gradcheck.hpp"
#include "ilts/transformer.hpp"

namespace ilts {
namespace {

// Tensor-by-tensor count written out by hand for a GPT-2 block stack.
std::size_t hand_count(int layers, int d, int ctx) {
  const std::size_t D = static_cast<std::size_t>(d);
  const std::size_t block = 2 * D            // ln_1
                            + D * 3 * D + 3 * D  // c_attn
                            + D * D + D          // attn c_proj
                            + 2 * D              // ln_2
                            + D * 4 * D + 4 * D  // c_fc
                            + 4 * D * D + D;     // mlp c_proj
  return 57 * D + D + static_cast<std::size_t>(ctx) * D + static_cast<std::size_t>(layers) * block + 2 * D +
         D * 5 + 5;
}

TEST(Transformer, PresetParameterCounts) {
  struct Row {
    SizePreset preset;
    std::size_t expect;
  };
  for (const Row& r : {Row{SizePreset::Tiny, 212189}, Row{SizePreset::Small, 701381},
                       Row{SizePreset::Medium, 2419717}, Row{SizePreset::Big, 10737413}}) {
    const ModelConfig cfg = ModelConfig::preset(r.preset);
    EXPECT_EQ(count_parameters(cfg), r.expect) << preset_name(r.preset);
    EXPECT_EQ(hand_count(cfg.n_layers, cfg.d_model, cfg.context_len), r.expect);
  }
  EXPECT_EQ(Transformer<float>(ModelConfig::preset(SizePreset::Tiny), 0).parameter_count(), 212189u);
}

TEST(Transformer, PresetShapes) {
  const ModelConfig m = ModelConfig::preset(SizePreset::Medium);
  EXPECT_EQ(m.n_layers, 12);
  EXPECT_EQ(m.d_model, 128);
  EXPECT_EQ(m.n_heads, 8);
  EXPECT_EQ(ModelConfig::preset(SizePreset::Tiny).d_head, 12);
  EXPECT_EQ(parse_preset("big"), SizePreset::Big);
  try {
    parse_preset("huge");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownPreset);
  }
}

TEST(Transformer, ValidateRejectsBadHeads) {
  ModelConfig cfg = ModelConfig::preset(SizePreset::Tiny);
  cfg.n_heads = 5;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidDims);
  }
  cfg = ModelConfig::preset(SizePreset::Tiny);
  cfg.n_layers = 0;
  EXPECT_THROW(Transformer<float>(cfg, 0), Error);
}

ad::Matrix<double> random_tokens(int rows, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ad::Matrix<double> x(rows, kTokenDim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

TEST(Transformer, CausalUnderFuturePerturbation) {
  ModelConfig cfg = ModelConfig::preset(SizePreset::Tiny);
  const Transformer<double> model(cfg, 4);
  const int seq = 24;
  ad::Matrix<double> x = random_tokens(2 * seq, 1);
  const ad::Matrix<double> base = model.predict(x, 2, seq);
  const int cut = 10;
  for (int b = 0; b < 2; ++b) x.row(b * seq + cut).setConstant(3.0);
  const ad::Matrix<double> pert = model.predict(x, 2, seq);
  for (int b = 0; b < 2; ++b) {
    for (int t = 0; t < seq; ++t) {
      const double diff = (pert.row(b * seq + t) - base.row(b * seq + t)).cwiseAbs().maxCoeff();
      if (t < cut) EXPECT_EQ(diff, 0.0) << "t=" << t;
      else if (t == cut) EXPECT_GT(diff, 0.0);
    }
  }
}

TEST(Transformer, ForwardRejectsBadShapes) {
  const Transformer<float> model(ModelConfig::preset(SizePreset::Tiny), 0);
  EXPECT_THROW(model.predict(ad::Matrix<float>::Zero(10, kTokenDim), 2, 6), Error);
  EXPECT_THROW(model.predict(ad::Matrix<float>::Zero(252, kTokenDim), 1, 252), Error);
  EXPECT_THROW(model.predict(ad::Matrix<float>::Zero(4, 56), 1, 4), Error);
}

TEST(Transformer, ZeroHeadPredictsZero) {
  Transformer<float> model(ModelConfig::preset(SizePreset::Tiny), 2);
  model.zero_output_head();
  EXPECT_EQ(model.predict(random_tokens(8, 3).cast<float>(), 1, 8).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Transformer, InitializationStatistics) {
  const Transformer<double> model(ModelConfig::preset(SizePreset::Medium), 0);
  const auto& p = model.params();
  const auto& s = model.slots();
  auto stdev = [](const ad::Matrix<double>& m) {
    const double mean = m.mean();
    return std::sqrt((m.array() - mean).square().mean());
  };
  EXPECT_NEAR(stdev(p[static_cast<std::size_t>(s.layers[0].w_qkv)].value), 0.02, 5e-4);
  EXPECT_NEAR(stdev(p[static_cast<std::size_t>(s.layers[0].w_proj)].value), 0.02 / std::sqrt(24.0), 2e-4);
  EXPECT_EQ(p[static_cast<std::size_t>(s.layers[3].ln1_g)].value.minCoeff(), 1.0);
  EXPECT_EQ(p[static_cast<std::size_t>(s.layers[3].b_qkv)].value.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Transformer, CastPreservesPredictions) {
  const Transformer<float> f(ModelConfig::preset(SizePreset::Tiny), 6);
  const Transformer<double> d = f.cast<double>();
  const ad::Matrix<double> x = random_tokens(16, 2);
  const ad::Matrix<double> a = f.predict(x.cast<float>(), 1, 16).cast<double>();
  EXPECT_LT((a - d.predict(x, 1, 16)).cwiseAbs().maxCoeff(), 1e-4);
}

}  // namespace
}  // namespace ilts
