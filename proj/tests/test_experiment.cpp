#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sfperc/experiment.hpp"

using namespace sfperc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfperc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const int status = std::system((std::string(SFPERC_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Validation) {
  ExperimentConfig cfg;
  cfg.n = {100};
  cfg.c = 20.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.c = 1.0;
  EXPECT_NO_THROW(cfg.validate());
  cfg.n = {1000, 100};
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.n = {100};
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.trials = 1;
  cfg.command = Command::kGrow;
  cfg.c = 20.0;  // irrelevant without percolation
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Commands, NamesRoundTrip) {
  for (auto c : {Command::kGrow, Command::kPercolate, Command::kTheorem1, Command::kBpLimits, Command::kYuleCheck,
                 Command::kSpacings})
    EXPECT_EQ(parse_command(to_string(c)), c);
  EXPECT_FALSE(parse_command("nope"));
}

TEST(WriteTable, CsvQuotingAndPrecision) {
  const fs::path dir = scratch("table");
  fs::create_directories(dir);
  Table t{{"a", "b", "c"}, {{std::int64_t{1}, 0.1, std::string("x,\"y\"")}, {Cell{}, 1.0 / 3.0, std::string("z")}}};
  write_table(dir / "t.csv", t, Format::kCsv);
  EXPECT_EQ(slurp(dir / "t.csv"),
            "a,b,c\r\n1,0.10000000000000001,\"x,\"\"y\"\"\"\r\n,0.33333333333333331,z\r\n");
  write_table(dir / "t.jsonl", t, Format::kJson);
  EXPECT_EQ(slurp(dir / "t.jsonl"),
            "{\"a\":1,\"b\":0.1,\"c\":\"x,\\\"y\\\"\"}\n{\"a\":null,\"b\":0.3333333333333333,\"c\":\"z\"}\n");
}

TEST(EmitSummary, EmptyTrialSetGivesHeaders) {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  Summary s;
  s.k = 2;
  const auto files = emit_summary(s, dir, "x", Format::kCsv);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(slurp(files[0]), "trial,n,C0_over_n,delta,delta_early,x1,x2\r\n");
  EXPECT_EQ(slurp(files[1]), "n,quantity,mean,stderr,theory,relative_error\r\n");
}

TEST(EmitSummary, SingleTrialHasNoStdError) {
  TrialRow row;
  row.n = 1000;
  row.c0_over_n = 0.7;
  row.top_scaled = {0.5};
  const auto agg = aggregate_trials({row}, 0.0, std::log(2.0), 1.0);
  ASSERT_FALSE(agg.empty());
  EXPECT_EQ(agg[0].quantity, "C0_over_n");
  EXPECT_DOUBLE_EQ(agg[0].mean, 0.7);
  EXPECT_FALSE(agg[0].std_error.has_value());
}

TEST(ExpectedDelta, MatchesDirectIntegration) {
  // (1 - p) int_0^t [E Y(s) - E Y_0(s)] ds with E Y = 2(1+b)e^{(2+b)s} and
  // E Y_0 = (2(1+b) - (1-p)(1+b)) e^{m s}, the root cluster losing 1+b when e_1 is cut.
  const double beta = 0.5, p = 0.9, t = 2.0;
  const double m = 2.0 + beta - (1.0 - p) * (1.0 + beta);
  const double y0 = 2.0 * (1.0 + beta) - (1.0 - p) * (1.0 + beta);
  double integral = 0.0;
  const int steps = 200000;
  for (int i = 0; i < steps; ++i) {
    const double s = (i + 0.5) * t / steps;
    integral += (2.0 * (1.0 + beta) * std::exp((2.0 + beta) * s) - y0 * std::exp(m * s)) * t / steps;
  }
  EXPECT_NEAR(expected_delta(beta, p, t), (1.0 - p) * integral, 1e-6);
  EXPECT_DOUBLE_EQ(expected_delta(beta, 1.0, t), 0.0);
}

TEST(ExpectedDelta, AgreesWithSimulation) {
  // Timed trees at n = 10^4, c = ln 2, r = 1, read off at the early window.
  ExperimentConfig cfg;
  cfg.command = Command::kTheorem1;
  cfg.n = {10'000};
  cfg.trials = 3000;
  cfg.seed = 21;
  cfg.out_path = scratch("delta");
  run(cfg);
  std::ifstream in(cfg.out_path / "theorem1_aggregate.csv");
  std::string line;
  double mean = NAN, se = NAN, theory = NAN;
  while (std::getline(in, line)) {
    if (line.find(",delta_early,") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::stringstream ss(line);
    std::string n, q;
    ss >> n >> q >> mean >> se >> theory;
  }
  EXPECT_NEAR(mean, theory, 4.0 * se);
}

TEST(Run, ByteIdenticalAcrossWorkerCounts) {
  ExperimentConfig cfg;
  cfg.command = Command::kTheorem1;
  cfg.n = {2000, 5000};
  cfg.trials = 30;
  cfg.seed = 3;
  cfg.out_path = scratch("det1");
  cfg.jobs = 1;
  const auto a = run(cfg);
  cfg.out_path = scratch("det4");
  cfg.jobs = 4;
  const auto b = run(cfg);
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].filename(), b.files[i].filename());
    EXPECT_EQ(slurp(a.files[i]), slurp(b.files[i])) << a.files[i];
  }
}

TEST(Cli, GrowWritesFiveLines) {
  const fs::path dir = scratch("grow");
  ASSERT_EQ(cli("grow --beta 0 --n 5 --trials 1 --seed 1 --out " + dir.string()), 0);
  const std::string first = slurp(dir / "tree_n5_trial0.txt");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 5);
  ASSERT_EQ(cli("grow --beta 0 --n 5 --trials 1 --seed 1 --out " + dir.string()), 0);
  EXPECT_EQ(slurp(dir / "tree_n5_trial0.txt"), first);
}

TEST(Cli, UsageErrors) {
  const std::string out = " --out " + scratch("usage").string();
  EXPECT_EQ(cli("theorem1 --c 20 --n 100" + out), kExitUsage);
  EXPECT_EQ(cli("theorem1 --n 1000 --n 100" + out), kExitUsage);
  EXPECT_EQ(cli("frobnicate" + out), kExitUsage);
  EXPECT_EQ(cli("grow --n 10 --trials 0" + out), kExitUsage);
  EXPECT_EQ(cli("grow --n 10 --format xml" + out), kExitUsage);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"beta": 1.0, "n": 7, "trials": 2, "seed": 5})";
  }
  ASSERT_EQ(cli("grow --config " + (dir / "cfg.json").string() + " --n 4 --out " + (dir / "o").string()), 0);
  const std::string echo = slurp(dir / "o" / "config.json");
  EXPECT_NE(echo.find("\"beta\": 1.0"), std::string::npos);
  EXPECT_NE(echo.find("\"seed\": 5"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "o" / "tree_n4_trial1.txt"));
  EXPECT_FALSE(fs::exists(dir / "o" / "tree_n7_trial0.txt"));
}
