#include <gtest/gtest.h>

#include <filesystem>

#include "ilts/binary.hpp"
#include "ilts/checkpoint.hpp"
#include "ilts/gradcheck.hpp"
#include "ilts/training.hpp"

namespace ilts {
namespace {

namespace fs = std::filesystem;

TEST(Hyperparams, SizeLadderAndBatchScaling) {
  const TrainConfig base;
  auto lr = [&](SizePreset p, int batch) {
    return scale_hyperparams(base, ModelConfig::preset(p), batch).learning_rate;
  };
  EXPECT_NEAR(lr(SizePreset::Medium, 512), 1.58e-5, 1e-12);
  // Identity runs ignored batch size: 6.3e-5, 3.2e-5, 1.3e-5 for tiny, small, big.
  EXPECT_NEAR(lr(SizePreset::Tiny, 512), 6.3e-5, 0.05e-5);
  EXPECT_NEAR(lr(SizePreset::Small, 512), 3.2e-5, 0.05e-5);
  EXPECT_NEAR(lr(SizePreset::Big, 512), 1.3e-5, 0.05e-5);
  EXPECT_NEAR(lr(SizePreset::Medium, 2048), 3.16e-5, 1e-12);
  EXPECT_EQ(scale_hyperparams(base, ModelConfig::preset(SizePreset::Small), 64).batch_size, 64);
  ModelConfig custom = ModelConfig::preset(SizePreset::Tiny);
  custom.size = SizePreset::Custom;
  EXPECT_THROW(scale_hyperparams(base, custom, 512), Error);
  EXPECT_THROW(scale_hyperparams(base, ModelConfig::preset(SizePreset::Tiny), 0), Error);
}

class TrainingTest : public ::testing::Test {
 protected:
  TraceLibrary lib = build_library(80, 1, kContextLen, Family::Orthogonal, 1);

  ModelState fresh(int batch = 4) const {
    ModelState s;
    s.model = Transformer<float>(ModelConfig::preset(SizePreset::Tiny), 3);
    s.train.batch_size = batch;
    s.train.learning_rate = 1e-3;
    s.train.micro_batch = 2;
    s.data_seed = 17;
    return s;
  }
};

TEST_F(TrainingTest, BatchLayoutAndMaskedMse) {
  const auto traces = training_traces(lib, 1, 0, 3);
  const Batch b = make_batch(traces);
  EXPECT_EQ(b.tokens.rows(), 3 * kContextLen);
  EXPECT_EQ(b.mask.size(), static_cast<std::size_t>(3 * kContextLen));
  const Batch s = slice_batch(b, 1, 2);
  EXPECT_EQ(s.tokens.topRows(kContextLen), b.tokens.middleRows(kContextLen, kContextLen));

  ad::Matrix<double> pred = ad::Matrix<double>::Zero(4, 5), target = ad::Matrix<double>::Ones(4, 5);
  target.row(1).setConstant(3.0);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(masked_mse<double>(pred, target, mask), 5.0);
  try {
    masked_mse<double>(pred, target, std::vector<std::uint8_t>(4, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyMask);
  }
  EXPECT_THROW(masked_mse<double>(pred, target, std::vector<std::uint8_t>(3, 1)), Error);

  auto other = training_traces(lib, 1, 0, 2);
  other[1].provenance.pop_back();
  EXPECT_THROW(make_batch(other), Error);
}

TEST_F(TrainingTest, StepsReduceLossOnFixedBatch) {
  ModelState s = fresh();
  const Batch b = make_batch(training_traces(lib, 5, 0, 4));
  const double first = train_step(s, b).loss;
  double last = first;
  for (int i = 0; i < 15; ++i) last = train_step(s, b).loss;
  EXPECT_LT(last, first);
  EXPECT_EQ(s.step, 16u);
  EXPECT_EQ(s.examples_seen, 64u);
}

TEST_F(TrainingTest, NonFiniteLossLeavesParameters) {
  ModelState s = fresh();
  Batch b = make_batch(training_traces(lib, 5, 0, 2));
  b.targets(0, 0) = std::numeric_limits<float>::quiet_NaN();
  b.mask[0] = 1;
  const auto before = s.model.params()[0].value;
  try {
    train_step(s, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteLoss);
  }
  EXPECT_EQ(s.model.params()[0].value, before);
  EXPECT_EQ(s.step, 0u);
}

TEST_F(TrainingTest, ResumeMatchesUninterruptedRun) {
  const fs::path path = fs::temp_directory_path() / ("ilts_ckpt_" + std::to_string(::getpid()) + ".ilc");
  ModelState straight = fresh();
  std::vector<std::uint64_t> traj_a, traj_b;
  train_steps(straight, lib, 4, [&](const TrainProgress& p) { traj_a.push_back(p.examples_seen); });

  ModelState part = fresh();
  train_steps(part, lib, 2, [&](const TrainProgress& p) { traj_b.push_back(p.examples_seen); });
  save_checkpoint(part, path);
  ModelState resumed = load_checkpoint(path);
  EXPECT_EQ(resumed.step, 2u);
  EXPECT_EQ(resumed.train, part.train);
  EXPECT_EQ(resumed.model.config(), part.model.config());
  train_steps(resumed, lib, 2, [&](const TrainProgress& p) { traj_b.push_back(p.examples_seen); });

  EXPECT_EQ(traj_a, traj_b);
  for (std::size_t i = 0; i < straight.model.params().size(); ++i) {
    EXPECT_EQ(straight.model.params()[i].value, resumed.model.params()[i].value) << straight.model.params()[i].name;
    EXPECT_EQ(straight.model.params()[i].m, resumed.model.params()[i].m);
  }

  auto bytes = bin::read_file(path);
  bytes[100] ^= 1;
  bin::write_file_atomic(path, bytes);
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptFile);
  }
  fs::remove(path);
}

TEST_F(TrainingTest, GradientCheckTinyContext32) {
  const Transformer<float> model(ModelConfig::preset(SizePreset::Tiny), 8);
  auto traces = training_traces(lib, 3, 0, 2);
  Batch b = slice_batch(make_batch(traces), 0, 2);
  // Truncate to the first 32 rows of each trace.
  Batch s;
  s.batch = 2;
  s.seq = 32;
  s.tokens.resize(64, kTokenDim);
  s.targets.resize(64, kStateDim);
  for (int i = 0; i < 2; ++i) {
    s.tokens.middleRows(i * 32, 32) = b.tokens.middleRows(i * kContextLen, 32);
    s.targets.middleRows(i * 32, 32) = b.targets.middleRows(i * kContextLen, 32);
    for (int t = 0; t < 32; ++t) s.mask.push_back(b.mask[static_cast<std::size_t>(i * kContextLen + t)]);
  }
  GradCheckOptions opts;
  opts.n_params = 120;
  const GradCheckReport ok = grad_check(model, s, opts);
  EXPECT_LT(ok.max_rel_error, 1e-3);
  EXPECT_EQ(ok.entries.size(), 120u);

  opts.corrupt_attention_query = 1.5;
  opts.n_params = 300;
  EXPECT_GT(grad_check(model, s, opts).max_rel_error, 1e-2);
}

TEST_F(TrainingTest, SumLossGradientsVanishForEmptyMask) {
  const Transformer<double> model = Transformer<float>(ModelConfig::preset(SizePreset::Tiny), 8).cast<double>();
  Batch b = make_batch(training_traces(lib, 3, 0, 1));
  std::fill(b.mask.begin(), b.mask.end(), 0);
  for (const auto& g : loss_gradients(model, b, true)) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace ilts
