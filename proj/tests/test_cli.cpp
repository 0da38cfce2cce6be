#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / ("frugal_cli_" + std::to_string(::getpid()));

int sh(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + " " + FRUGAL_AL_BIN + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(sh("gen --nc 4 --per-class 60 --d 2 --seed 7 --label-noise 0.1 --out " + (kRoot / "data").string()), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
  static std::string data_flags() {
    return "--dataset " + (kRoot / "data" / "train.csv").string() + " --test-dataset " +
           (kRoot / "data" / "test.csv").string();
  }
};

}  // namespace

TEST_F(Cli, GenWritesCsvsAndManifest) {
  EXPECT_TRUE(fs::exists(kRoot / "data" / "train.csv"));
  EXPECT_TRUE(fs::exists(kRoot / "data" / "test.csv"));
  auto manifest = json::parse(slurp(kRoot / "data" / "manifest.json"));
  EXPECT_EQ(manifest["generator"]["per_class"], 60);
  EXPECT_EQ(slurp(kRoot / "data" / "train.csv").rfind("# config_hash=" + manifest["config_hash"].get<std::string>(), 0), 0u);
}

TEST_F(Cli, GenIsByteIdentical) {
  ASSERT_EQ(sh("gen --nc 4 --per-class 60 --d 2 --label-noise 0.1 --gen-seed 7 --out " + (kRoot / "again").string()), 0);
  EXPECT_EQ(slurp(kRoot / "again" / "train.csv"), slurp(kRoot / "data" / "train.csv"));
  EXPECT_EQ(slurp(kRoot / "again" / "test.csv"), slurp(kRoot / "data" / "test.csv"));
}

TEST_F(Cli, GenRejectsZeroPerClass) {
  EXPECT_EQ(sh("gen --per-class 0 --out " + (kRoot / "bad").string()), 2);
  EXPECT_NE(slurp(kRoot / "last.log").find("--per-class"), std::string::npos);
  EXPECT_NE(slurp(kRoot / "last.log").find("Usage"), std::string::npos);
}

TEST_F(Cli, RunEmitsRecordsAndSummary) {
  const auto out = kRoot / "run_rlc";
  ASSERT_EQ(sh("run --strategy rl-c --T 10 --B 8 " + data_flags() + " --out " + out.string()), 0) << slurp(kRoot / "last.log");
  auto recs = lines(slurp(out / "records.ndjson"));
  ASSERT_EQ(recs.size(), 11u);  // header + 10 iterations
  auto header = json::parse(recs[0]);
  EXPECT_EQ(header["type"], "header");
  EXPECT_EQ(header["config"]["strategy"], "rl-c");
  for (std::size_t k = 1; k < recs.size(); ++k) EXPECT_EQ(json::parse(recs[k])["t"], k - 1);
  auto summary = lines(slurp(out / "summary.csv"));
  EXPECT_EQ(summary.size(), 12u);  // hash comment + header + 10 rows
  EXPECT_EQ(summary[0].rfind("# config_hash=", 0), 0u);
}

TEST_F(Cli, RunFlatHasUnitWeights) {
  const auto out = kRoot / "run_flat";
  ASSERT_EQ(sh("run --strategy flat --T 4 --B 16 " + data_flags() + " --out " + out.string()), 0);
  auto recs = lines(slurp(out / "records.ndjson"));
  for (std::size_t k = 1; k < recs.size(); ++k) {
    auto r = json::parse(recs[k]);
    EXPECT_EQ(r["alpha"], 1.0);
    EXPECT_EQ(r["beta"], 1.0);
    EXPECT_EQ(r["eta"], 1.0);
  }
}

TEST_F(Cli, RunTwiceIsByteIdentical) {
  const auto a = kRoot / "det_a", b = kRoot / "det_b";
  const std::string args = "run --strategy rl-d --T 5 --B 12 --seed 4 " + data_flags();
  ASSERT_EQ(sh(args + " --out " + a.string()), 0);
  ASSERT_EQ(sh(args + " --out " + b.string()), 0);
  for (const char* f : {"records.ndjson", "summary.csv", "config.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  const auto cfg = kRoot / "cfg.json";
  std::ofstream(cfg) << R"({"strategy": "rep", "T": 3, "B": 8, "seed": 1})";
  const auto out = kRoot / "cfg_run";
  ASSERT_EQ(sh("run --config " + cfg.string() + " --T 2 " + data_flags() + " --out " + out.string()), 0);
  auto resolved = json::parse(slurp(out / "config.json"));
  EXPECT_EQ(resolved["config"]["T"], 2);
  EXPECT_EQ(resolved["config"]["strategy"], "rep");
  EXPECT_EQ(resolved["config"]["B"], 8);
}

TEST_F(Cli, MalformedConfigExitsTwo) {
  const auto bad = kRoot / "bad.json";
  std::ofstream(bad) << "{\"T\": 3,\n  \"B\": }";
  EXPECT_EQ(sh("run --config " + bad.string() + " " + data_flags() + " --out " + (kRoot / "x").string()), 2);
  EXPECT_NE(slurp(kRoot / "last.log").find(bad.string() + ":"), std::string::npos);

  const auto wrong = kRoot / "wrong.json";
  std::ofstream(wrong) << R"({"classifier": {"lr": "fast"}})";
  EXPECT_EQ(sh("run --config " + wrong.string() + " " + data_flags() + " --out " + (kRoot / "x").string()), 2);
  EXPECT_NE(slurp(kRoot / "last.log").find("classifier.lr"), std::string::npos);
}

TEST_F(Cli, EnvironmentSetsDefaultOutput) {
  const auto out = kRoot / "from_env";
  ASSERT_EQ(sh("run --strategy random --T 2 --B 8 " + data_flags(), "FRUGAL_AL_OUT=" + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "records.ndjson"));
}

TEST_F(Cli, CompareGridShape) {
  const auto out = kRoot / "cmp";
  ASSERT_EQ(sh("compare --strategies rep,div,amb,all,rl-d,rl-c --seeds 2 --T 10 --B 8 --include-supervised " +
               data_flags() + " --out " + out.string()),
            0)
      << slurp(kRoot / "last.log");
  auto grid = lines(slurp(out / "grid.csv"));
  // hash comment, column header, samp% row, 6 strategies, supervised
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid[1], "strategy,t1,t2,t3,t4,t5,t6,t7,t8,t9");
  EXPECT_EQ(grid[2].rfind("samp%,", 0), 0u);
  EXPECT_EQ(grid[9].rfind("supervised,", 0), 0u);
  EXPECT_TRUE(fs::exists(out / "grid_std.csv"));
  EXPECT_TRUE(fs::exists(out / "curves.csv"));
  auto traj = lines(slurp(out / "trajectories.csv"));
  EXPECT_EQ(traj.size(), 2u + 6 * 2 * 10);
}

TEST_F(Cli, CompareRejectsEmptyStrategyList) {
  EXPECT_EQ(sh("compare --strategies \"\" " + data_flags() + " --out " + (kRoot / "y").string()), 2);
}

TEST_F(Cli, BadDatasetReportsLine) {
  const auto bad = kRoot / "bad.csv";
  std::ofstream(bad) << "id,f0,label\na,1,0\nb,zz,1\n";
  EXPECT_EQ(sh("run --dataset " + bad.string() + " --out " + (kRoot / "z").string()), 2);
  EXPECT_NE(slurp(kRoot / "last.log").find("3"), std::string::npos);
}
