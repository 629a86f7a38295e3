#include <sys/wait.h>

#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include <json.hpp>

#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + AGROSTRESS_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::slurp(out);
  r.err = testutil::slurp(err);
  return r;
}

std::string small_config(const TempDir& dir, const std::string& extra_train = "") {
  const auto path = dir / "run.toml";
  testutil::spit(path, "seed = 3\n"
                       "out = \"" + (dir / "runs").string() + "\"\n"
                       "[data]\nsource = \"synth\"\n"
                       "[synth]\nn_hybrids = 12\nn_envs = 6\ninstances_per_hybrid = 4\n"
                       "[growth]\ngdu_mode = \"mean_variant\"\n"
                       "[model]\nkind = \"dem-mlp\"\nhidden = [8, 6]\n"
                       "[train]\nepochs = 2\n" + extra_train);
  return path.string();
}

void run_pipeline(const TempDir& dir, const std::string& cfg) {
  for (const char* c : {"synth", "dem", "train", "sensitivity", "rank", "cluster", "compare", "eval"}) {
    const auto r = run_cli(dir, std::string(c) + " --config " + cfg);
    ASSERT_EQ(r.code, 0) << c << ": " << r.err;
  }
}

}  // namespace

TEST(Cli, FullPipelineWritesReport) {
  TempDir dir("cli");
  const auto cfg = small_config(dir);
  run_pipeline(dir, cfg);
  const auto r = run_cli(dir, "eval --config " + cfg);
  ASSERT_EQ(r.code, 0);
  const std::string run_dir = r.out.substr(0, r.out.find('\n'));
  const auto report = nlohmann::json::parse(testutil::slurp(std::filesystem::path(run_dir) / "report.json"));
  EXPECT_TRUE(report["regression"].contains("test_mse_over_sigma"));
  EXPECT_TRUE(report["clustering"]["cluster_recovery_accuracy"].contains("heat"));
  EXPECT_TRUE(report["clustering"]["cluster_recovery_accuracy"].contains("drought"));
  EXPECT_TRUE(report["clustering"].contains("resistant_fraction"));
  EXPECT_EQ(report["provenance"]["tool"], "agrostress");
}

TEST(Cli, ManifestIsByteIdenticalAcrossRuns) {
  TempDir dir("cli");
  const auto cfg = small_config(dir);
  const auto manifest = [&] {
    for (const auto& e : std::filesystem::directory_iterator(dir / "runs")) return testutil::slurp(e.path() / "manifest.json");
    return std::string();
  };
  run_pipeline(dir, cfg);
  const auto first = manifest();
  std::filesystem::remove_all(dir / "runs");
  run_pipeline(dir, cfg);
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, manifest());
  std::set<std::string> paths;
  const auto parsed = nlohmann::json::parse(first);
  for (const auto& e : parsed["artifacts"]) paths.insert(e["path"].get<std::string>());
  for (const char* p : {"config.json", "data/truth.csv", "model/model.bin", "sensitivity/R_heat.csv",
                        "analysis/clusters.json", "report.json"})
    EXPECT_TRUE(paths.count(p)) << p;
}

TEST(Cli, TrainWithoutDataNamesSynth) {
  TempDir dir("cli");
  const auto r = run_cli(dir, "train --config " + small_config(dir));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("agrostress synth"), std::string::npos) << r.err;
}

TEST(Cli, ClusterWithoutMatricesNamesSensitivity) {
  TempDir dir("cli");
  const auto cfg = small_config(dir);
  ASSERT_EQ(run_cli(dir, "synth --config " + cfg).code, 0);
  const auto r = run_cli(dir, "cluster --config " + cfg);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("sensitivity"), std::string::npos) << r.err;
}

TEST(Cli, ConfigErrorsNameTheField) {
  TempDir dir("cli");
  auto r = run_cli(dir, "train --config " + small_config(dir, "rho = 2.0\n"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.rho"), std::string::npos) << r.err;
  r = run_cli(dir, "train --config " + small_config(dir, "bogus = 1\n"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.bogus"), std::string::npos) << r.err;
  r = run_cli(dir, "train --config " + small_config(dir, "batch_size = \"x\"\n"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.batch_size"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli(dir, "").code, 2);
  EXPECT_EQ(run_cli(dir, "frobnicate --config x").code, 2);
  EXPECT_EQ(run_cli(dir, "synth --config " + (dir / "missing.toml").string()).code, 2);
  EXPECT_EQ(run_cli(dir, "--version").code, 0);
}

TEST(Cli, SeedOverrideChangesRunDirectory) {
  TempDir dir("cli");
  const auto cfg = small_config(dir);
  const auto a = run_cli(dir, "synth --config " + cfg);
  const auto b = run_cli(dir, "synth --config " + cfg + " --seed 4");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_NE(a.out, b.out);
  EXPECT_NE(b.out.find("seed4"), std::string::npos);
}
