#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nswlab/commands.hpp"

using namespace nswlab;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("nswlab_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimalRun = R"({
  "learner": {"kind": "ucb"},
  "environment": {"kind": "stochastic", "parameters": {"mean": [[0.5, 0.3], [0.3, 0.5]]}},
  "T": 500,
  "seed": 1
})";

const char* kSweep = R"({
  "learner": {"kind": "ucb"},
  "environment": {"kind": "stochastic", "parameters": {"mean": [[0.5, 0.3], [0.3, 0.5], [0.2, 0.2]]}},
  "T_grid": [1024, 4096],
  "seeds": [0, 1]
})";

CommandOptions options_for(const TempDir& dir, const std::string& config) {
  CommandOptions o;
  o.config_path = config;
  o.out_dir = (dir.path() / "out").string();
  o.workers = 1;
  return o;
}

}  // namespace

TEST(ConfigParse, EnvironmentRoundTrip) {
  const std::vector<EnvironmentSpec> specs = {
      StochasticEnv{UtilityMatrix::from_rows({{0.1, 0.2}, {0.3, 0.4}}), Noise::kDeterministic},
      HardStochasticEnv{4, 2, 1000, 3},
      AdversarialScheduleEnv{{UtilityMatrix(2, 1, 0.25), UtilityMatrix(2, 1, 0.75)}},
      PairEnv{"nswprod", PairSide::kB},
      IndifferentAgentEnv{3, 4, 2, 0.1, 0.2, 0.9, {1.0, 0.6, 0.3}},
      SharedProfileEnv{{0.8, 0.5}, 3, 0.3, 0.1},
  };
  for (const auto& spec : specs) {
    const json j = environment_to_json(spec);
    const auto back = environment_from_json(j);
    EXPECT_EQ(environment_to_json(back), j) << j.dump();
    EXPECT_EQ(back.index(), spec.index());
  }
}

TEST(ConfigParse, LearnerAndSwfRoundTrip) {
  const json learner = {{"kind", "ftrl_tsallis"}, {"beta", 0.5}, {"eta", 0.01}};
  EXPECT_EQ(learner_to_json(learner_from_json(learner)), learner);
  const json fixed = {{"kind", "fixed"}, {"p", {0.25, 0.75}}};
  EXPECT_EQ(learner_from_json(fixed).fixed, (std::vector<double>{0.25, 0.75}));
  EXPECT_THROW(learner_from_json(json{{"kind", "fixed"}, {"p", {0.25, 0.5}}}), domain_error);
  EXPECT_THROW(learner_from_json(json{{"kind", "exp3"}}), config_error);
  EXPECT_THROW(learner_from_json(json{{"kind", "ucb"}, {"eta", -1.0}}), config_error);

  const json combo = {{"kind", "convex_combo"},
                      {"terms",
                       {{{"coefficient", 0.5}, {"swf", {{"kind", "nsw"}}}},
                        {{"coefficient", 0.5}, {"swf", {{"kind", "utilitarian"}, {"weights", {0.5, 0.5}}}}}}}};
  const auto f = swf_from_json(combo);
  EXPECT_EQ(f.kind, SwfKind::kConvexCombo);
  EXPECT_EQ(swf_to_json(f), combo);
  EXPECT_EQ(swf_from_json(json("nsw")).kind, SwfKind::kNsw);
}

TEST(ConfigParse, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"learner": {"kind": "ucb"}, "environment": {"kind": "pair"},
                                                   "colour": 1})")),
               config_error);
  EXPECT_THROW(environment_from_json(json::parse(R"({"kind": "pair", "parameters": {"wich": "nsw"}})")),
               config_error);
  EXPECT_THROW(environment_from_json(json::parse(R"({"kind": "pair", "parameters": {"which": "x"}})")),
               config_error);
  EXPECT_THROW(environment_from_json(json::parse(R"({"kind": "stochastic", "parameters": {"mean": [[1.5]]}})")),
               domain_error);
  EXPECT_THROW(environment_from_json(json::parse(R"({"kind": "hard_stochastic", "parameters": {"K": "four"}})")),
               config_error);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"learner": {"kind": "ucb"}})")), config_error);
}

TEST(ConfigParse, DefaultsAndCompatibilityChecks) {
  const auto c = run_config_from_json(json::parse(kMinimalRun));
  EXPECT_EQ(c.episode.feedback, Feedback::kBandit);
  EXPECT_EQ(c.episode.horizon, 500u);
  EXPECT_EQ(c.episode.swf.kind, SwfKind::kNsw);
  const auto ftrl = run_config_from_json(json::parse(R"({"learner": {"kind": "ftrl_log_barrier"},
      "environment": {"kind": "pair"}})"));
  EXPECT_EQ(ftrl.episode.feedback, Feedback::kFullInfo);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"learner": {"kind": "ucb"}, "environment": {"kind": "pair"},
                                                   "feedback": "full_info"})")),
               config_error);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"learner": {"kind": "ucb", "arms": 3},
                                                   "environment": {"kind": "pair"}})")),
               dimension_error);
}

TEST(CmdRun, MinimalConfigWritesOutput) {
  TempDir dir;
  std::ostringstream out;
  EXPECT_EQ(cmd_run(options_for(dir, dir.write("run.json", kMinimalRun)), out), kExitOk);
  EXPECT_NE(out.str().find("status=ok"), std::string::npos);
  const auto summary = json::parse(slurp(dir.path() / "out" / "run.json"));
  EXPECT_EQ(summary.at("T"), 500);
  EXPECT_TRUE(summary.contains("regret"));
}

TEST(CmdRun, ConfigErrors) {
  TempDir dir;
  std::ostringstream a, b, c;
  EXPECT_EQ(cmd_run(options_for(dir, dir.write("bad.json", "{\"learner\": ")), a), kExitConfig);
  EXPECT_NE(a.str().find("status=config_error"), std::string::npos);
  const auto mismatch = dir.write("k.json", R"({"learner": {"kind": "fixed", "p": [0.2, 0.3, 0.5]},
      "environment": {"kind": "pair"}, "T": 10})");
  EXPECT_EQ(cmd_run(options_for(dir, mismatch), b), kExitConfig);
  EXPECT_EQ(cmd_run(options_for(dir, (dir.path() / "missing.json").string()), c), kExitConfig);
}

TEST(CmdSweep, RowsAndDeterminism) {
  TempDir dir;
  const auto cfg = dir.write("sweep.json", kSweep);
  std::ostringstream out;
  ASSERT_EQ(cmd_sweep(options_for(dir, cfg), out), kExitOk);
  const auto first = slurp(dir.path() / "out" / "sweep.csv");
  std::istringstream lines(first);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "T,seed,regret,benchmark,runtime_ms");
  EXPECT_EQ(rows[1].rfind("1024,0,", 0), 0u);
  EXPECT_EQ(rows[4].rfind("4096,1,", 0), 0u);
  const auto summary = json::parse(slurp(dir.path() / "out" / "sweep_summary.json"));
  EXPECT_EQ(summary.at("per_T").size(), 2u);

  // Data columns repeat exactly; runtime is the only column allowed to move.
  auto data_columns = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string l, result;
    while (std::getline(in, l)) result += l.substr(0, l.rfind(',')) + "\n";
    return result;
  };
  std::ostringstream again;
  ASSERT_EQ(cmd_sweep(options_for(dir, cfg), again), kExitOk);
  EXPECT_EQ(data_columns(slurp(dir.path() / "out" / "sweep.csv")), data_columns(first));
}

TEST(CmdSweep, EmptyGridIsConfigError) {
  TempDir dir;
  const auto cfg = dir.write("empty.json", R"({"learner": {"kind": "uniform"}, "environment": {"kind": "pair"},
      "T_grid": []})");
  std::ostringstream out;
  EXPECT_EQ(cmd_sweep(options_for(dir, cfg), out), kExitConfig);
  EXPECT_NE(out.str().find("status=config_error"), std::string::npos);
}

TEST(CmdVerifyHard, Outcomes) {
  TempDir dir;
  CommandOptions opts = options_for(dir, "");
  std::ostringstream prod, nsw, sto, bad, corrupt;
  EXPECT_EQ(cmd_verify_hard("nswprod", opts, {}, prod), kExitOk);
  EXPECT_NE(prod.str().find("delta_claimed=1/256"), std::string::npos);
  EXPECT_NE(prod.str().find("marginals-equal=true"), std::string::npos);

  // The stated NSW threshold gap exceeds what the tables deliver.
  EXPECT_EQ(cmd_verify_hard("nsw", opts, {}, nsw), kExitCheck);
  EXPECT_NE(nsw.str().find("marginals-equal=true"), std::string::npos);
  EXPECT_NE(nsw.str().find("delta_claimed=1/500"), std::string::npos);
  EXPECT_NE(nsw.str().find("gap_check=fail"), std::string::npos);
  EXPECT_NE(nsw.str().find("optimum_check=pass"), std::string::npos);

  EXPECT_EQ(cmd_verify_hard("stochastic", opts, {4, 2, 1'000'000}, sto), kExitOk);
  EXPECT_NE(sto.str().find("family_check=pass"), std::string::npos);
  EXPECT_EQ(cmd_verify_hard("other", opts, {}, bad), kExitConfig);

  opts.corrupt_tables = true;
  EXPECT_EQ(cmd_verify_hard("nswprod", opts, {}, corrupt), kExitCheck);
  EXPECT_NE(corrupt.str().find("marginals-equal=false"), std::string::npos);
}

TEST(CmdDemo, UniformClosedFormAndCsv) {
  TempDir dir;
  CommandOptions opts = options_for(dir, "");
  std::ostringstream out;
  ASSERT_EQ(cmd_demo_linear_regret("uniform", 4000, 2, opts, out), kExitOk);
  const auto csv = slurp(dir.path() / "out" / "demo_linear_regret.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "T,side_a,side_b,max_per_round_regret");
  auto value = [](double p1) { return 0.2 * std::sqrt(1 - p1) + 0.1 * std::sqrt(p1) + 0.3; };
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string t, a, b, m;
    std::getline(fields, t, ',');
    std::getline(fields, a, ',');
    std::getline(fields, b, ',');
    std::getline(fields, m, ',');
    EXPECT_NEAR(std::stod(a), value(0.2) - value(0.5), 1e-9);
    EXPECT_GE(std::stod(m), 0.0);
  }
  EXPECT_EQ(rows, 3);

  std::ostringstream bad1, bad2;
  EXPECT_EQ(cmd_demo_linear_regret("ftrl_log_barrier", 4000, 2, opts, bad1), kExitConfig);
  EXPECT_EQ(cmd_demo_linear_regret("uniform", 999, 2, opts, bad2), kExitConfig);
}
