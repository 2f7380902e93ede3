#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace fs = std::filesystem;
using namespace evtrig;

namespace {
const std::string kCli = EVTRIG_CLI;
const fs::path kConfigs = EVTRIG_CONFIGS;

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("evtrig_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct CliRun {
  int code = -1;
  std::string err;
};

CliRun run(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + (dir / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}
}  // namespace

TEST(Cli, SolveCaseStudyAndSimulate) {
  const fs::path dir = scratch("solve");
  ASSERT_EQ(run("solve --config \"" + (kConfigs / "case_study.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const json rec = json::parse(slurp(dir / "result.json"));
  EXPECT_TRUE(rec["converged"].get<bool>());
  EXPECT_NEAR(rec["alpha"][0]["alpha"].get<double>(), 0.95, 0.05);
  const auto iv = rec["policy"]["slices"][0]["keep_intervals"][0];
  EXPECT_NEAR(iv[0].get<double>(), 0.243, 0.03);
  EXPECT_NEAR(iv[1].get<double>(), 1.657, 0.03);
  EXPECT_TRUE(fs::exists(dir / "keep_intervals.csv"));

  ASSERT_EQ(run("simulate --out \"" + dir.string() + "\" --samples 100000 --seed 5", dir).code, 0);
  const std::string first = slurp(dir / "simulation.json");
  const json sim = json::parse(first);
  EXPECT_TRUE(sim["within_3_std_errors"].get<bool>());
  EXPECT_NEAR(sim["forward_cost"].get<double>(), rec["cost"].get<double>(), 1e-10);
  ASSERT_EQ(run("simulate --out \"" + dir.string() + "\" --samples 100000 --seed 5 --threads 2", dir).code, 0);
  EXPECT_EQ(slurp(dir / "simulation.json"), first);
}

TEST(Cli, SymmetricDesignIsReported) {
  const fs::path dir = scratch("symmetric");
  write(dir / "cfg.json", R"({"horizon": 3, "noise": {"mu": 0}, "iteration": {"alpha0": 0, "max_iter": 5}})");
  ASSERT_EQ(run("solve --config \"" + (dir / "cfg.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const json rec = json::parse(slurp(dir / "result.json"));
  EXPECT_EQ(rec["design"], "converged to symmetric design");
}

TEST(Cli, MalformedConfigExitsWithOne) {
  const fs::path dir = scratch("malformed");
  write(dir / "cfg.json", R"({"lambda": "abc", "noise": {"mu": 0}})");
  const CliRun r = run("solve --config \"" + (dir / "cfg.json").string() + "\" --out \"" + dir.string() + "\"", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lambda"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "result.json"));
}

TEST(Cli, UnknownFlagOrMissingConfigExitsWithOne) {
  const fs::path dir = scratch("flags");
  EXPECT_EQ(run("solve --bogus", dir).code, 1);
  EXPECT_EQ(run("solve --config \"" + (dir / "nope.json").string() + "\"", dir).code, 1);
  EXPECT_EQ(run("simulate --out \"" + dir.string() + "\"", dir).code, 1);
}

TEST(Cli, GridTooSmallExitsWithTwo) {
  const fs::path dir = scratch("overflow");
  const Problem p(evtrig::testing::bimodal_spec(0.5, 1), Grid(0.5, 11));
  const BaselineResult b = symmetric_baseline(p);
  const CodesignResult r{b.policy, AlphaMap(1), {}, true, 0, b.cost};
  write_file_atomic(dir / "result.json", solve_record(p, r, b).dump());
  const CliRun run_result = run("simulate --out \"" + dir.string() + "\" --samples 1000", dir);
  EXPECT_EQ(run_result.code, 2) << run_result.err;
  EXPECT_NE(run_result.err.find("grid"), std::string::npos);
}

TEST(Cli, SweepEmptyListIsHeaderOnly) {
  const fs::path dir = scratch("sweep_empty");
  write(dir / "cfg.json", R"({"horizon": 10, "sweep": {"mu": []}})");
  ASSERT_EQ(run("sweep --config \"" + (dir / "cfg.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  EXPECT_EQ(slurp(dir / "sweep.csv"), "mu,cost_symmetric,cost_iterative,reduction_pct,iterations,converged\n");
}

TEST(Cli, SweepRows) {
  const fs::path dir = scratch("sweep");
  write(dir / "cfg.json", R"({"horizon": 2, "sweep": {"mu": [0.0, 0.95]}})");
  ASSERT_EQ(run("sweep --config \"" + (dir / "cfg.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const std::string csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("\n0,"), std::string::npos);
  EXPECT_NE(csv.find("\n0.95,"), std::string::npos);
}

TEST(Cli, BaselineAndOracle) {
  const fs::path dir = scratch("oracle");
  ASSERT_EQ(run("oracle --config \"" + (kConfigs / "bernoulli_oracle.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const json o = json::parse(slurp(dir / "oracle.json"));
  EXPECT_DOUBLE_EQ(o["cost"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(o["cost_symmetric"].get<double>(), 0.5);

  ASSERT_EQ(run("oracle --config \"" + (kConfigs / "case_study.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const json one = json::parse(slurp(dir / "oracle.json"));
  EXPECT_NEAR(one["alpha_star"].get<double>(), 0.95, 2e-3);

  write(dir / "big.json", R"({"horizon": 4, "noise": {"discrete": {"support": [-1, 1], "probs": [0.5, 0.5]}}})");
  EXPECT_EQ(run("oracle --config \"" + (dir / "big.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 1);

  write(dir / "b.json", R"({"horizon": 1, "noise": {"mu": 0.5}})");
  ASSERT_EQ(run("baseline --config \"" + (dir / "b.json").string() + "\" --out \"" + dir.string() + "\"", dir).code, 0);
  const json b = json::parse(slurp(dir / "baseline.json"));
  const auto iv = b["policy"]["slices"][0]["keep_intervals"][0];
  EXPECT_NEAR(iv[1].get<double>(), std::sqrt(0.5), 1e-9);
}

TEST(Cli, AlwaysTransmitPolicySimulatesToLambdaN) {
  const fs::path dir = scratch("always");
  const Problem p = evtrig::testing::bimodal_problem(0.5, 4);
  CodesignResult r{Policy::always_transmit(p.grid(), 4), AlphaMap(4), {}, true, 0, 2.0};
  const json rec = solve_record(p, r, symmetric_baseline(p));
  write_file_atomic(dir / "result.json", rec.dump());
  ASSERT_EQ(run("simulate --out \"" + dir.string() + "\" --samples 1000", dir).code, 0);
  const json sim = json::parse(slurp(dir / "simulation.json"));
  EXPECT_EQ(sim["mc_cost"].get<double>(), 2.0);
  EXPECT_EQ(sim["z_score"].get<double>(), 0.0);
}
