#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tkv/cli.hpp"

namespace tkv {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(std::move(args), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tkv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, WitnessDefaultsSucceed) {
  const Outcome o = run_cli({"witness", "--trials", "20", "--summary-path", path("s.json"), "--out", path("w.csv")});
  EXPECT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NE(o.out.find("success_rate="), std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(path("s.json")));
  for (const char* key : {"protocol", "n", "d", "epsilon", "C", "trials", "success_rate", "jl_good_success_rate",
                          "textbook_bounds", "exact_bounds"}) {
    EXPECT_TRUE(summary.contains(key)) << key;
  }
  EXPECT_EQ(summary["d"], 1664);
  EXPECT_EQ(summary["trials"], 20);
  const std::string csv = slurp(path("w.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

TEST_F(CliTest, SeparationViolationExitsTwo) {
  const Outcome o = run_cli({"witness", "--epsilon", "0.3", "--trials", "5"});
  EXPECT_EQ(o.code, cli::kExitConstraint);
  EXPECT_NE(o.err.find("separation violated"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExit64) {
  EXPECT_EQ(run_cli({"witness", "--trials", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"nonsense"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"witness", "--protocol", "three"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"bench", "--n", "abc"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"witness", "--config", path("missing.cfg")}).code, cli::kExitUsage);
}

TEST_F(CliTest, DimensionBelowJlBoundExitsTwo) {
  EXPECT_EQ(run_cli({"witness", "--d", "10", "--trials", "2"}).code, cli::kExitConstraint);
}

TEST_F(CliTest, UnwritableOutputExits74) {
  const Outcome o = run_cli({"bench", "--n", "4", "--d", "2", "--out", path("no/such/dir/out.csv")});
  EXPECT_EQ(o.code, cli::kExitIo);
}

TEST_F(CliTest, BenchCsvToStdout) {
  const Outcome o = run_cli({"bench", "--n", "3,5", "--d", "2", "--layout", "both"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(o.out.rfind("layout,n,d,step,append_ns,attend_ns,append_ops,attend_ops,logical_bytes\n", 0), 0u);
  EXPECT_NE(o.out.find("\ntwo,5,2,5,"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndPrecedence) {
  {
    std::ofstream cfg(path("run.cfg"));
    cfg << "# witness settings\n"
        << "trials = 7\n"
        << "n = 4\n"
        << "seed = 5\n";
  }
  Outcome o = run_cli({"witness", "--config", path("run.cfg"), "--summary-path", path("a.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  auto s = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(s["trials"], 7);
  EXPECT_EQ(s["n"], 4);
  EXPECT_EQ(s["seed"], 5);

  o = run_cli({"witness", "--config", path("run.cfg"), "--trials", "3", "--summary-path", path("b.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  s = nlohmann::json::parse(slurp(path("b.json")));
  EXPECT_EQ(s["trials"], 3);
  EXPECT_EQ(s["n"], 4);
}

TEST_F(CliTest, ConfigRejectsUnknownKeys) {
  {
    std::ofstream cfg(path("bad.cfg"));
    cfg << "bogus = 1\n";
  }
  EXPECT_EQ(run_cli({"witness", "--config", path("bad.cfg")}).code, cli::kExitUsage);
  EXPECT_THROW(cli::read_flat_config(path("missing.cfg")), std::runtime_error);
}

TEST_F(CliTest, JlCheckAndSubgenEval) {
  Outcome o = run_cli({"jl-check", "--n", "32", "--multipliers", "8", "--seeds", "5"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NE(o.out.find("violation_rate"), std::string::npos);

  o = run_cli({"subgen-eval", "--n", "200,400", "--seeds", "1", "--summary-path", path("sg.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const auto s = nlohmann::json::parse(slurp(path("sg.json")));
  ASSERT_EQ(s["rows"].size(), 4u);
  EXPECT_EQ(s["rows"][0]["logical_bytes"], s["rows"][1]["logical_bytes"]);
}

TEST_F(CliTest, SubgenEvalLosslessCases) {
  const auto max_error = [&](const std::string& json_path) {
    const auto s = nlohmann::json::parse(slurp(json_path));
    double worst = 0.0;
    for (const auto& row : s["rows"]) worst = std::max(worst, row["abs_error"].get<double>());
    return worst;
  };
  Outcome o = run_cli({"subgen-eval", "--n", "300", "--seeds", "2", "--m-true", "1", "--spread", "0",
                       "--summary-path", path("m1.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_LE(max_error(path("m1.json")), 1e-12);
  o = run_cli({"subgen-eval", "--n", "300", "--seeds", "2", "--delta", "0", "--summary-path", path("d0.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_LE(max_error(path("d0.json")), 1e-12);
  EXPECT_EQ(run_cli({"subgen-eval", "--spread", "0.5"}).code, cli::kExitUsage);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string exe = TKV_CLI_PATH;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("witness --trials 5"), 0);
  EXPECT_EQ(status("witness --epsilon 0.3"), 2);
  EXPECT_EQ(status("witness --trials 0"), 64);
  EXPECT_EQ(status("--help"), 0);
}

}  // namespace
}  // namespace tkv
