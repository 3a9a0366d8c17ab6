#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(ANF_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh(const std::string& name) {
  auto d = fs::temp_directory_path() / ("anf_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::string kShort =
    "-o run.total_steps=2000 -o run.initial_collect=300 -o run.eval_interval=200 -o run.eval_episodes=2 -o agent.hidden=[16,16]";

}  // namespace

TEST(Cli, TrainIsReproducible) {
  const auto a = fresh("train_a"), b = fresh("train_b");
  ASSERT_EQ(cli("train toy_anf_td3 --seed 3 " + kShort + " --out " + a.string()).code, 0);
  ASSERT_EQ(cli("train toy_anf_td3 --seed 3 " + kShort + " --out " + b.string()).code, 0);
  for (const char* f : {"metrics.csv", "connectivity.csv", "snapshots.csv"}) {
    const auto x = slurp(a / "seed3" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / "seed3" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "seed3" / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(a / "manifest.jsonl"));
}

TEST(Cli, OverrideReachesManifest) {
  const auto d = fresh("override");
  const auto r = cli("train toy_dense_sac --seed 0 " + kShort + " -o ene.noise_fraction=0.95 --json --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto js = nlohmann::json::parse(r.out);
  ASSERT_EQ(js.size(), 1u);
  EXPECT_EQ(js[0]["seed"], 0);
  std::ifstream is(d / "manifest.jsonl");
  std::string line;
  ASSERT_TRUE(std::getline(is, line));
  const auto rec = nlohmann::json::parse(line);
  EXPECT_EQ(rec["d_ene"], 160);
  EXPECT_EQ(rec["d_og"], 8);
}

TEST(Cli, ResumeFromCheckpoint) {
  const auto a = fresh("resume_a"), b = fresh("resume_b");
  ASSERT_EQ(cli("train toy_anf_td3 --seed 1 " + kShort + " -o run.checkpoint_interval=1000 --out " + a.string()).code, 0);
  const auto ckpt = b / "ckpt.bin";
  fs::create_directories(b);
  // resuming a finished run adds nothing and rewrites the same outputs
  fs::copy_file(a / "seed1" / "checkpoint.bin", ckpt);
  ASSERT_EQ(cli("train toy_anf_td3 --seed 1 " + kShort + " -o run.checkpoint_interval=1000 --resume " + ckpt.string() +
                " --out " + b.string())
                .code,
            0);
  EXPECT_EQ(slurp(a / "seed1" / "metrics.csv"), slurp(b / "seed1" / "metrics.csv"));
  EXPECT_EQ(cli("train toy_anf_td3 --seed 2 " + kShort + " --resume " + ckpt.string() + " --out " + b.string()).code, 2);
}

TEST(Cli, MissingConfigExitsWithUsageCode) {
  const auto d = fresh("missing");
  EXPECT_EQ(cli("train /nonexistent/cfg.yaml --out " + d.string()).code, 2);
  EXPECT_FALSE(fs::exists(d));
  EXPECT_EQ(cli("train toy_anf_td3 -o agent.lr=-1 --out " + d.string()).code, 2);
  EXPECT_FALSE(fs::exists(d));
  EXPECT_EQ(cli("bogus-command").code, 2);
}

TEST(Cli, UnknownSuite) {
  EXPECT_EQ(cli("suite no-such-suite --dry-run").code, 2);
  const auto r = cli("suite static-ablation --dry-run --seeds 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Static-ANF-TD3"), std::string::npos);
  EXPECT_NE(r.out.find("3 configs x 2 seeds"), std::string::npos);
}

TEST(Cli, SuiteWritesTable) {
  const auto d = fresh("suite");
  const auto r = cli("suite static-ablation --seeds 2 " + kShort + " -o run.total_steps=1000 --json --out " + d.string());
  ASSERT_EQ(r.code, 0);
  const auto js = nlohmann::json::parse(r.out);
  EXPECT_EQ(js["rows"].size(), 3u);
  EXPECT_TRUE(fs::exists(d / "table.txt"));
  EXPECT_TRUE(fs::exists(d / "table.json"));
}

TEST(Cli, AnalyzeSummarizesRuns) {
  const auto d = fresh("analyze");
  ASSERT_EQ(cli("train toy_anf_td3 --seed 0 --seed 1 " + kShort + " --out " + d.string()).code, 0);
  const auto r = cli("analyze " + (d / "seed0").string() + " " + (d / "seed1").string() + " --json --svg");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(nlohmann::json::accept(r.out));
  EXPECT_EQ(cli("analyze " + (d / "nothing_here").string()).code, 4);
}

TEST(Cli, EnvInfo) {
  auto r = cli("env-info point_mass_reach --noise-fraction 0.9 --json");
  ASSERT_EQ(r.code, 0);
  auto js = nlohmann::json::parse(r.out);
  EXPECT_EQ(js["d_ene"], 80);
  r = cli("env-info point_mass_reach --noise-fraction 0 --json");
  js = nlohmann::json::parse(r.out);
  EXPECT_EQ(js["d_ene"], 8);
  r = cli("env-info --table");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("37600"), std::string::npos);
  EXPECT_NE(r.out.find("1100"), std::string::npos);
  EXPECT_EQ(cli("env-info --noise-fraction 1.0").code, 2);
}

TEST(Cli, Conjecture) {
  EXPECT_EQ(cli("conjecture --mu 0").code, 0);
  const auto d = fresh("conj");
  fs::create_directories(d);
  EXPECT_EQ(cli("conjecture --mu 4 --out " + (d / "traj.csv").string()).code, 0);
  EXPECT_FALSE(slurp(d / "traj.csv").empty());
  const auto r = cli("conjecture --mu 4 --lr 10 --json");
  EXPECT_EQ(r.code, 1);
  const auto js = nlohmann::json::parse(r.out);
  EXPECT_EQ(js["diverged"], true);
}

TEST(Cli, HelpListsKeys) {
  const auto r = cli("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* k : {"ene.noise_fraction", "sparsity.topology_period", "pene.period", "agent.hidden", "toy_anf_td3"})
    EXPECT_NE(r.out.find(k), std::string::npos) << k;
}
