#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Outcome run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + DPCLUSTER_BIN + std::string(" ") + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf{};
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), got);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dpcluster_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const std::string kSmallRun = "run --n 10000 --d 10 --t 3000 --eps 1 --delta 1e-6 --seed 5";

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  const auto a = run_cli("gen --n 200 --d 3 --domain-size 65 --seed 9 --out " + path("a.csv"));
  const auto b = run_cli("gen --n 200 --d 3 --domain-size 65 --seed 9 --out " + path("b.csv"));
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  const auto text = slurp(path("a.csv"));
  EXPECT_EQ(text, slurp(path("b.csv")));
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# grid |X|=65 d=3");
  std::getline(in, line);
  EXPECT_EQ(line, "x0,x1,x2");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
  }
  EXPECT_EQ(rows, 200);
  run_cli("gen --n 200 --d 3 --domain-size 65 --seed 10 --out " + path("c.csv"));
  EXPECT_NE(text, slurp(path("c.csv")));
}

TEST_F(Cli, RunReportSchema) {
  const auto r = run_cli(kSmallRun + " --report " + path("r.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("r.jsonl")));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["config"]["seed"], 5);
  EXPECT_EQ(j["config"]["seed_source"], "flag");
  for (const char* key : {"exact_coverage", "coverage_shortfall", "delta_measured", "oracle_radius", "w_measured"})
    EXPECT_TRUE(j["truth"].contains(key)) << key;
  EXPECT_TRUE(j["budget"].contains("eps_total"));
  double sum = 0.0;
  for (const auto& e : j["budget"]["entries"]) sum += e["eps"].get<double>();
  EXPECT_NEAR(j["budget"]["eps_total"].get<double>(), sum, 1e-9 * sum);
  EXPECT_TRUE(j.contains("wall_time_s"));
}

TEST_F(Cli, RunIsReproducible) {
  auto strip = [](std::string s) {
    auto j = nlohmann::json::parse(s);
    j.erase("wall_time_s");
    return j.dump();
  };
  ASSERT_EQ(run_cli(kSmallRun + " --no-oracle --report " + path("a.jsonl")).code, 0);
  ASSERT_EQ(run_cli(kSmallRun + " --no-oracle --report " + path("b.jsonl")).code, 0);
  EXPECT_EQ(strip(slurp(path("a.jsonl"))), strip(slurp(path("b.jsonl"))));
}

TEST_F(Cli, LocalRunWritesTranscript) {
  const auto r = run_cli(
      "run --model local --n 20000 --d 2 --domain-size 65 --radius 0.05 --t 10000 --eps 16 --repetitions 1 "
      "--list-cap 1 --seed 3 --no-oracle --report " +
      path("l.jsonl"));
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("l.jsonl")));
  EXPECT_LE(j["local"]["max_rounds_per_user"].get<int>(), 3);
  ASSERT_TRUE(fs::exists(path("l.jsonl.transcript.jsonl")));
  std::ifstream tr(path("l.jsonl.transcript.jsonl"));
  std::string line;
  ASSERT_TRUE(std::getline(tr, line));
  const auto e = nlohmann::json::parse(line);
  for (const char* key : {"round", "user", "randomizer", "payload", "eps", "user_eps_total"})
    EXPECT_TRUE(e.contains(key)) << key;
}

TEST_F(Cli, TBelowFloorIsRejected) {
  const auto r = run_cli("run --n 2000 --d 3 --t 50 --seed 1 --report " + path("x.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("floor"), std::string::npos) << r.out;
}

TEST_F(Cli, UnknownFlagIsAPreconditionError) { EXPECT_EQ(run_cli("run --bogus 1").code, 2); }

TEST_F(Cli, ConfigOverridesFlags) {
  std::ofstream(path("c.json")) << R"({"seed": 7, "no-oracle": true})";
  ASSERT_EQ(run_cli(kSmallRun + " --config " + path("c.json") + " --report " + path("c.jsonl")).code, 0);
  const auto j = nlohmann::json::parse(slurp(path("c.jsonl")));
  EXPECT_EQ(j["config"]["seed"], 7);
  EXPECT_FALSE(j["truth"].contains("w_measured"));
}

TEST_F(Cli, ConfigRejectsUnknownKeys) {
  std::ofstream(path("bad.json")) << R"({"sead": 7})";
  const auto r = run_cli(kSmallRun + " --config " + path("bad.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("sead"), std::string::npos);
}

TEST_F(Cli, SeedFromEnvironment) {
  const std::string args = "run --n 10000 --d 10 --t 3000 --no-oracle --report ";
  ASSERT_EQ(run_cli(args + path("e.jsonl"), "DPCLUSTER_SEED=42").code, 0);
  const auto j = nlohmann::json::parse(slurp(path("e.jsonl")));
  EXPECT_EQ(j["config"]["seed"], 42);
  EXPECT_EQ(j["config"]["seed_source"], "env");
  ASSERT_EQ(run_cli(args + path("f.jsonl") + " --seed 43", "DPCLUSTER_SEED=42").code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("f.jsonl")))["config"]["seed_source"], "flag");
}

TEST_F(Cli, VerifyDpPassesAndCatchesBrokenMechanism) {
  const auto ok = run_cli("verify-dp --trials 20000 --report " + path("v.jsonl"));
  EXPECT_EQ(ok.code, 0) << ok.out;
  const auto bad = run_cli("verify-dp --trials 20000 --inject-broken --report " + path("w.jsonl"));
  EXPECT_EQ(bad.code, 4) << bad.out;
  EXPECT_NE(bad.out.find("FAIL broken"), std::string::npos);
}

TEST_F(Cli, EpsilonCapAbortsBeforeReport) {
  const auto r = run_cli(kSmallRun + " --eps-cap 0.5 --report " + path("cap.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("cap.jsonl")));
}
