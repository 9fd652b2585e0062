#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

using namespace bwvi;
using namespace bwvi::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bwvi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    unsetenv("BWVI_SEED");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  fs::path dir_;
};

const char* kQuadratic = R"({
  "target": {"type": "quadratic", "dim": 3, "condition_number": 4, "seed": 1},
  "iterations": 10,
  "schedule": {"type": "constant", "gamma": 0.01},
  "eval_samples": 64,
  "repetitions": 1,
  "seed": 5
})";

}  // namespace

TEST_F(CliTest, RunRowCount) {
  const fs::path cfg = write("q.json", kQuadratic);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitOk) << err.str();
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0], "run_id,seed,t,gamma,free_energy,free_energy_se,w2_sq,diverged");
  EXPECT_EQ(rows[1].rfind("0,5,0,0.01,", 0), 0u);
  EXPECT_EQ(rows[11].rfind("0,5,10,", 0), 0u);
}

TEST_F(CliTest, RunRepetitionsUseConsecutiveSeeds) {
  std::string text = kQuadratic;
  text.replace(text.find("\"repetitions\": 1"), 16, "\"repetitions\": 3");
  const fs::path cfg = write("q.json", text);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, {}, 2u}, out, err), kExitOk) << err.str();
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 1u + 3u * 11u);
  EXPECT_EQ(rows[12].rfind("1,6,0,", 0), 0u);
  EXPECT_EQ(rows[23].rfind("2,7,0,", 0), 0u);
}

TEST_F(CliTest, SeedOverride) {
  const fs::path cfg = write("q.json", kQuadratic);
  setenv("BWVI_SEED", "42", 1);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitOk);
  EXPECT_EQ(lines(out.str())[1].rfind("0,42,0,", 0), 0u);
  setenv("BWVI_SEED", "abc", 1);
  EXPECT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitConfig);
  unsetenv("BWVI_SEED");
}

TEST_F(CliTest, LogisticHasEmptyW2Column) {
  write_logistic_dataset(toy_logistic_dataset(20, 3, 1), dir_ / "d.csv");
  const fs::path cfg = write("l.json", R"({
    "target": {"type": "logistic", "dataset": "d.csv", "ridge": 1.0},
    "iterations": 2, "eval_samples": 16,
    "schedule": {"type": "constant", "gamma": 0.01}})");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitOk) << err.str();
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NE(rows[1].find(",,0"), std::string::npos);
}

TEST_F(CliTest, TheoremScheduleForQuadratic) {
  const fs::path cfg = write("q.json", R"({
    "target": {"type": "quadratic", "dim": 2, "condition_number": 10},
    "iterations": 1, "eval_samples": 16, "schedule": {"type": "theorem"}})");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitOk) << err.str();
  // gamma_0 = 1 / (10 L kappa) = 1e-3
  const auto row = lines(out.str())[1];
  const double gamma = std::stod(row.substr(row.find(',', row.find(',', 2) + 1) + 1));
  EXPECT_NEAR(gamma, 1e-3, 1e-15);
}

TEST_F(CliTest, MissingFileExitsIo) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run({dir_ / "absent.json", {}, {}}, out, err), kExitIo);
  const fs::path cfg = write("l.json", R"({"target": {"type": "logistic", "dataset": "none.csv"}})");
  EXPECT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitIo);
}

TEST_F(CliTest, NegativeIterationsExitsConfig) {
  const fs::path cfg = write("q.json", R"({"target": {"type": "quadratic"}, "iterations": -5})");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("iterations"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsNameTheField) {
  const std::pair<const char*, const char*> cases[] = {
      {R"({"iterations": 3})", "target"},
      {R"({"target": {"type": "cubic"}})", "target.type"},
      {R"({"target": {"type": "quadratic", "dim": 0}})", "target.dim"},
      {R"({"target": {"type": "quadratic"}, "minibatch": 0})", "minibatch"},
      {R"({"target": {"type": "quadratic"}, "repetitions": 0})", "repetitions"},
      {R"({"target": {"type": "quadratic"}, "algorithm": "adam"})", "algorithm"},
      {R"({"target": {"type": "quadratic"}, "schedule": {"type": "constant", "gamma": -1}})",
       "schedule.gamma"},
      {R"({"target": {"type": "quadratic"}, "init": {"variance": 0}})", "init.variance"},
      {R"({"target": {"type": "quadratic", "dim": 2}, "init": {"mean": [1, 2, 3]}})", "init.mean"},
      {R"({"target": {"type": "logistic", "dataset": "x.csv"}, "schedule": {"type": "theorem"}})",
       "schedule.delta_sq"},
      {R"({not json)", "<document>"},
  };
  for (const auto& [text, field] : cases) {
    const fs::path cfg = write("bad.json", text);
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run({cfg, {}, {}}, out, err), kExitConfig) << text;
    EXPECT_NE(err.str().find(field), std::string::npos) << err.str();
  }
}

TEST_F(CliTest, SweepRowCountAndDeterminism) {
  std::string text = kQuadratic;
  text.replace(text.find("\"repetitions\": 1"), 16, "\"repetitions\": 2");
  const fs::path cfg = write("q.json", text);
  SweepOptions opts{cfg, 1e-3, 1e-1, 3, dir_ / "a.csv", 2u};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(opts, out, err), kExitOk) << err.str();
  opts.out = dir_ / "b.csv";
  opts.workers = 1u;
  ASSERT_EQ(cmd_sweep(opts, out, err), kExitOk);
  const std::string a = slurp(dir_ / "a.csv");
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
  const auto rows = lines(a);
  ASSERT_EQ(rows.size(), 25u);
  EXPECT_EQ(rows[0], "gamma,algorithm,estimator,seed,final_free_energy,diverged");
  EXPECT_EQ(rows[1].rfind("0.001,spgd,price,5,", 0), 0u);
}

TEST_F(CliTest, SweepRecordsDivergence) {
  const fs::path cfg = write("q.json", R"({
    "target": {"type": "quadratic", "dim": 3, "condition_number": 100},
    "iterations": 100, "repetitions": 1, "eval_samples": 64})");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep({cfg, 1.0, 1.0, 1, {}, {}}, out, err), kExitOk) << err.str();
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k].back(), '1') << rows[k];
}

TEST_F(CliTest, SweepBadGridExitsConfig) {
  const fs::path cfg = write("q.json", kQuadratic);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_sweep({cfg, 1.0, 1e-3, 3, {}, {}}, out, err), kExitConfig);
}

TEST_F(CliTest, RunOutputIsByteIdentical) {
  const fs::path cfg = write("q.json", kQuadratic);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({cfg, dir_ / "x.csv", {}}, out, err), kExitOk);
  ASSERT_EQ(cmd_run({cfg, dir_ / "y.csv", {}}, out, err), kExitOk);
  EXPECT_EQ(slurp(dir_ / "x.csv"), slurp(dir_ / "y.csv"));
  EXPECT_TRUE(out.str().empty());
}

TEST_F(CliTest, UnwritableOutputExitsIo) {
  const fs::path cfg = write("q.json", kQuadratic);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run({cfg, dir_ / "no" / "such" / "dir.csv", {}}, out, err), kExitIo);
}

TEST(CliVerify, MutationsFail) {
  for (Mutation m : {Mutation::ProxUnsquared, Mutation::JkoShift, Mutation::ScaleOrientation,
                     Mutation::ReparamCovarianceScale}) {
    std::ostringstream out;
    EXPECT_EQ(cmd_verify({VerifyLevel::Quick, m}, out), kExitFailure) << to_string(m);
    EXPECT_NE(out.str().find("[FAIL]"), std::string::npos);
  }
}

TEST(CliVerify, QuickPasses) {
  std::ostringstream out;
  EXPECT_EQ(cmd_verify({VerifyLevel::Quick, Mutation::None}, out), kExitOk) << out.str();
}

TEST(CliMain, UsageErrors) {
  char prog[] = "bwvi";
  char bogus[] = "frobnicate";
  char* argv1[] = {prog};
  EXPECT_EQ(main_entry(1, argv1), kExitConfig);
  char* argv2[] = {prog, bogus};
  EXPECT_EQ(main_entry(2, argv2), kExitConfig);
}
