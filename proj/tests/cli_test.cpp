#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  std::string cmd = "env -u LAYOUTREV_REMOTE_URL " + std::string(LAYOUTREV_CLI) + " " + args +
                    " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("layoutrev_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, SynthIsDeterministic) {
  CliRun a = run("corpus synth --n 20 --seed 9");
  CliRun b = run("corpus synth --n 20 --seed 9 --out " + path("c.jsonl"));
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out, slurp(path("c.jsonl")));
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 20);
  EXPECT_NE(run("corpus synth --n 20 --seed 10").out, a.out);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("sample --strategy sideways --in x").code, 1);
  EXPECT_EQ(run("chain --backend echo").code, 1);  // neither --in nor --s0
  EXPECT_EQ(run("sample --in " + path("missing.jsonl")).code, 2);
  std::ofstream(path("bad.jsonl")) << "{\"id\":1}\n";
  EXPECT_EQ(run("corpus stage-fid --in " + path("bad.jsonl")).code, 2);
  std::ofstream(path("s0.txt")) << "CANVAS 50 50\nBUTTON 0 0 8 8\n";
  EXPECT_EQ(run("chain --backend remote --s0 " + path("s0.txt")).code, 3);
}

TEST_F(Cli, SampleCountsExamples) {
  ASSERT_EQ(run("corpus synth --n 30 --seed 1 --out " + path("c.jsonl")).code, 0);
  CliRun r = run("sample --in " + path("c.jsonl") + " --strategy hop-jti --repeats 3 --seed 4");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 90);
}

TEST_F(Cli, EchoChainEvaluatesToFullRouge) {
  ASSERT_EQ(run("corpus synth --n 24 --seed 3 --out " + path("c.jsonl")).code, 0);
  ASSERT_EQ(run("chain --backend echo --rounds 3 --in " + path("c.jsonl") + " --report " +
                path("r.jsonl"))
                .code,
            0);
  CliRun e = run("eval --reports " + path("r.jsonl") + " --reference " + path("c.jsonl") +
                " --fid-samples 24");
  ASSERT_EQ(e.code, 0);
  auto rows = csv(e.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"round", "sessions", "fid", "identical_rate",
                                               "rouge_l"}));
  for (std::size_t r = 2; r <= 3; ++r) {
    EXPECT_EQ(rows[r][0], std::to_string(r));
    EXPECT_EQ(rows[r][1], "24");
    EXPECT_EQ(rows[r][3], "100.00");
    EXPECT_EQ(rows[r][4], "100.00");
  }
}

TEST_F(Cli, RenderWritesPngs) {
  std::ofstream(path("s0.txt")) << "CANVAS 50 50\nBUTTON 0 0 8 8\n";
  ASSERT_EQ(run("render --in " + path("s0.txt") + " --out-dir " + path("png") + " --scale 2").code,
            0);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(path("png"))) {
    ++files;
    EXPECT_EQ(entry.path().extension(), ".png");
    EXPECT_EQ(slurp(entry.path()).substr(1, 3), "PNG");
  }
  EXPECT_EQ(files, 1u);
}

}  // namespace
