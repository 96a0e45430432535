// Drives the built nswlab executable and checks exit codes and status lines.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(NSWLAB_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Exactly one status line, and it is the last line.
std::string status_line(const std::string& out) {
  std::string last, status;
  int count = 0;
  std::size_t pos = 0;
  while (pos < out.size()) {
    const auto end = out.find('\n', pos);
    last = out.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    if (last.rfind("status=", 0) == 0) {
      status = last;
      ++count;
    }
    pos = end == std::string::npos ? out.size() : end + 1;
  }
  return count == 1 && status == last ? status : "";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("nswlab_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }

  std::string out_flag() const { return "--out " + (dir_ / "out").string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, RunMinimalConfig) {
  const auto cfg = file("run.json", R"({"learner": {"kind": "uniform"}, "environment": {"kind": "pair"}, "T": 100})");
  const auto r = run("run --config " + cfg + " " + out_flag());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(status_line(r.out), "status=ok");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "run.json"));
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  const auto broken = file("broken.json", "{ not json");
  auto r = run("run --config " + broken);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(status_line(r.out), "status=config_error");

  const auto mismatch = file("k.json", R"({"learner": {"kind": "ucb", "arms": 4}, "environment": {"kind": "pair"}})");
  r = run("run --config " + mismatch);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(status_line(r.out), "status=config_error");

  r = run("frobnicate");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(status_line(r.out), "status=config_error");

  const auto empty = file("e.json", R"({"learner": {"kind": "uniform"}, "environment": {"kind": "pair"},
      "T_grid": []})");
  r = run("sweep --config " + empty);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(status_line(r.out), "status=config_error");
}

TEST_F(CliTest, SweepIsByteDeterministic) {
  const auto cfg = file("s.json", R"({"learner": {"kind": "ucb"},
      "environment": {"kind": "stochastic", "parameters": {"mean": [[0.5, 0.3], [0.3, 0.5]]}},
      "T_grid": [1024, 4096], "seeds": [0, 1]})");
  auto data = [&](const std::string& workers) {
    const auto r = run("sweep --config " + cfg + " " + out_flag() + " --workers " + workers);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(status_line(r.out), "status=ok");
    std::ifstream in(dir_ / "out" / "sweep.csv");
    std::string line, result;
    int rows = 0;
    while (std::getline(in, line)) {
      result += line.substr(0, line.rfind(',')) + "\n";
      ++rows;
    }
    EXPECT_EQ(rows, 5);
    return result;
  };
  const auto first = data("1");
  EXPECT_EQ(first, data("1"));
  EXPECT_EQ(first, data("2"));
}

TEST_F(CliTest, VerifyHardExitCodes) {
  auto r = run("verify-hard nswprod");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(status_line(r.out), "status=ok");
  r = run("verify-hard nsw");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(status_line(r.out), "status=check_failed");
  EXPECT_NE(r.out.find("p_star=(0.2,0.8)"), std::string::npos);
  r = run("verify-hard stochastic --K 4 --N 2 --T 1000000");
  EXPECT_EQ(r.code, 0);
  r = run("verify-hard nswprod --corrupt-tables");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(status_line(r.out), "status=check_failed");
}

TEST_F(CliTest, DemoWritesCsv) {
  const auto r = run("demo-linear-regret --learner uniform --T 2000 --seeds 2 " + out_flag());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(status_line(r.out), "status=ok");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "demo_linear_regret.csv"));
  EXPECT_EQ(run("demo-linear-regret --learner ewoo").code, 1);
}
