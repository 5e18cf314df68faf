#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "manifest.hpp"
#include "ilts/metrics.hpp"

namespace ilts::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;
  std::string out_text, err_text;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("ilts_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ilts");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
    out_text = out.str();
    err_text = err.str();
    return rc;
  }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  static json read_json(const fs::path& path) {
    std::ifstream in(path);
    return json::parse(in);
  }

  void make_library(const std::string& name, const std::string& family = "orthogonal", int seed = 3) {
    ASSERT_EQ(cli({"gen-library", "--systems", "30", "--inits", "2", "--family", family, "--seed",
                   std::to_string(seed), "--out", p(name)}),
              kExitOk)
        << err_text;
  }

  void train(const std::string& lib, const std::string& out_dir, int steps, bool resume = false) {
    std::vector<std::string> args = {"train", "--library", p(lib), "--preset", "tiny", "--batch", "4",
                                     "--micro-batch", "4", "--lr", "1e-3", "--steps", std::to_string(steps),
                                     "--schedule-start", "8", "--save-every", "1", "--out-dir", p(out_dir)};
    if (resume) args.push_back("--resume");
    ASSERT_EQ(cli(args), kExitOk) << err_text;
  }
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}), kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}), kExitUsage);
  EXPECT_EQ(cli({"gen-library"}), kExitUsage);
  EXPECT_EQ(cli({"gen-library", "--systems", "many", "--out", p("x")}), kExitUsage);
  EXPECT_EQ(cli({"--help"}), kExitOk);
  EXPECT_EQ(cli({"gen-library", "--family", "spiral", "--out", p("x")}), kExitUsage);
}

TEST_F(CliTest, MissingAndCorruptInputs) {
  EXPECT_EQ(cli({"gen-traces", "--library", p("absent.ill"), "--out", p("t")}), kExitIo);
  std::ofstream(p("junk.ill")) << "not a library";
  EXPECT_EQ(cli({"gen-traces", "--library", p("junk.ill"), "--out", p("t")}), kExitIo);
  EXPECT_NE(err_text.find("error:"), std::string::npos);
}

TEST_F(CliTest, GenLibraryIsDeterministicAndRecordsManifest) {
  make_library("a.ill");
  make_library("b.ill");
  make_library("c.ill", "orthogonal", 4);
  EXPECT_EQ(sha256_file(p("a.ill")), sha256_file(p("b.ill")));
  EXPECT_NE(sha256_file(p("a.ill")), sha256_file(p("c.ill")));
  const json m = read_json(p("a.ill.manifest.json"));
  EXPECT_EQ(m.at("command"), "gen-library");
  EXPECT_EQ(m.at("seeds").at("library"), 3);
  ASSERT_EQ(m.at("outputs").size(), 1u);
  EXPECT_EQ(m.at("outputs")[0].at("sha256"), sha256_file(p("a.ill")));
  EXPECT_EQ(m.at("outputs")[0].at("sha256").get<std::string>().size(), 64u);
  const std::string config = m.at("config");
  EXPECT_NE(config.find("systems=30"), std::string::npos);
  EXPECT_NE(config.find("length=251"), std::string::npos);
  EXPECT_GE(m.at("wall_clock_seconds").get<double>(), 0.0);
}

TEST_F(CliTest, GenTracesWritesManifestWithInputDigest) {
  make_library("lib.ill");
  ASSERT_EQ(cli({"gen-traces", "--library", p("lib.ill"), "--count", "5", "--seed", "2", "--out", p("t.ilt")}),
            kExitOk)
      << err_text;
  const json m = read_json(p("t.ilt.manifest.json"));
  EXPECT_EQ(m.at("inputs")[0].at("sha256"), sha256_file(p("lib.ill")));
  EXPECT_EQ(m.at("seeds").at("traces"), 2);
}

TEST_F(CliTest, ResumedTrainingMatchesStraightRun) {
  make_library("lib.ill");
  train("lib.ill", "straight", 4);
  train("lib.ill", "split", 2);
  train("lib.ill", "split", 4, true);
  EXPECT_NE(out_text.find("resuming at step 2"), std::string::npos);
  EXPECT_EQ(sha256_file(p("straight/latest.ilc")), sha256_file(p("split/latest.ilc")));
  std::ifstream a(p("straight/train_log.ndjson")), b(p("split/train_log.ndjson"));
  std::string la, lb;
  int lines = 0;
  while (std::getline(a, la)) {
    ASSERT_TRUE(std::getline(b, lb));
    EXPECT_EQ(la, lb);
    ++lines;
  }
  EXPECT_EQ(lines, 4);
  // Checkpoints at 8 and 16 examples seen.
  EXPECT_TRUE(fs::exists(p("straight/ckpt-8.ilc")));
  EXPECT_TRUE(fs::exists(p("straight/ckpt-16.ilc")));
  EXPECT_EQ(read_json(p("straight/manifest.json")).at("command"), "train");
}

TEST_F(CliTest, EvalNeedleWithReferencePredictors) {
  make_library("lib.ill");
  ASSERT_EQ(cli({"eval", "--library", p("lib.ill"), "--predictor", "perfect-recall", "--kind", "needle", "--N",
                 "3", "--needle-pos", "1", "--n-configs", "4", "--n-inits", "2", "--out", p("m.ndjson")}),
            kExitOk)
      << err_text;
  const auto recs = read_ndjson(p("m.ndjson"));
  ASSERT_EQ(recs.size(), 10u);
  const int idx[] = {1, 2, 3, 7, 8};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(recs[i].index_within_segment, idx[i]);
    EXPECT_EQ(recs[i].haystack_size, 3);
    EXPECT_LE(recs[i].quantiles.q75, 1e-12);
  }
  EXPECT_TRUE(fs::exists(p("m.ndjson.manifest.json")));
  EXPECT_EQ(cli({"eval", "--library", p("lib.ill"), "--predictor", "pinv", "--kind", "sideways", "--out",
                 p("x.ndjson")}),
            kExitUsage);
}

TEST_F(CliTest, CheckpointFamilyMismatch) {
  make_library("orth.ill");
  make_library("ident.ill", "identity");
  train("orth.ill", "run", 1);
  const std::vector<std::string> base = {"eval", "--library", p("ident.ill"), "--checkpoint",
                                         p("run/latest.ilc"), "--kind", "uninterleaved", "--n-sequences", "2",
                                         "--out", p("m.ndjson")};
  EXPECT_EQ(cli(base), kExitMismatch);
  auto allowed = base;
  allowed.push_back("--allow-family-mismatch");
  EXPECT_EQ(cli(allowed), kExitOk) << err_text;
  EXPECT_EQ(cli({"eval", "--library", p("orth.ill"), "--checkpoint", p("run/missing.ilc"), "--kind",
                 "uninterleaved", "--out", p("m.ndjson")}),
            kExitIo);
}

TEST_F(CliTest, OodSyncDataset) {
  make_library("lib.ill");
  ASSERT_EQ(cli({"ood", "--library", p("lib.ill"), "--kind", "sync", "--N", "3", "--n-configs", "2", "--n-inits",
                 "2", "--out-dataset", p("sync.ind"), "--predictor", "pinv", "--out", p("ood.ndjson")}),
            kExitOk)
      << err_text;
  EXPECT_TRUE(fs::exists(p("sync.ind")));
  const auto recs = read_ndjson(p("ood.ndjson"));
  ASSERT_FALSE(recs.empty());
  EXPECT_EQ(recs.front().ood_kind, "sync");
}

TEST_F(CliTest, PruneWritesDotWithMseHeader) {
  make_library("lib.ill");
  train("lib.ill", "run", 1);
  ASSERT_EQ(cli({"prune", "--checkpoint", p("run/latest.ilc"), "--library", p("lib.ill"), "--steps", "2",
                 "--batch", "2", "--N", "2", "--n-inits", "2", "--config-index", "1", "--out", p("c.dot"),
                 "--metrics", p("c.ndjson")}),
            kExitOk)
      << err_text;
  std::ifstream in(p("c.dot"));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("// mse_one_after "), std::string::npos);
  EXPECT_NE(text.find("// mse_two_after "), std::string::npos);
  EXPECT_NE(text.find("digraph circuit {"), std::string::npos);
  const auto recs = read_ndjson(p("c.ndjson"));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].eval_kind, EvalKind::Circuit);
  EXPECT_EQ(recs[0].n_samples, 2u);
}

}  // namespace
}  // namespace ilts::cli
