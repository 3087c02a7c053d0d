// Copyright 2026 The Ens2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <regex>

#include "cli.hpp"
#include "ens2/io.hpp"
#include "test_support.hpp"

namespace ens2 {
namespace {

namespace fs = std::filesystem;
using testing::run_ens2;

std::string shq(const fs::path& p) { return "'" + p.string() + "'"; }

std::string search_args(const fs::path& out, const std::string& extra = "") {
  return "search --train " + shq(testing::demo("linear_train.csv")) + " --target label --budget 15 --grace 2 --seed 4 --out " +
         shq(out) + " " + extra;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    const auto r = run_ens2(search_args(*dir_ / "run"));
    ASSERT_EQ(r.exit_code, kCliOk) << r.output;
  }
  static void TearDownTestSuite() { delete dir_; }

  static fs::path run() { return *dir_ / "run"; }

  static testing::TempDir* dir_;
};

testing::TempDir* CliTest::dir_ = nullptr;

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run_ens2("").exit_code, kCliUsage);
  EXPECT_EQ(run_ens2("frobnicate").exit_code, kCliUsage);
  EXPECT_EQ(run_ens2("search --target label").exit_code, kCliUsage);
  EXPECT_EQ(run_ens2("predict --run x --test y --mode bagging").exit_code, kCliUsage);
  EXPECT_EQ(run_ens2("--help").exit_code, kCliOk);
}

TEST(Cli, UnknownTargetIsBadInput) {
  testing::TempDir dir;
  const auto r = run_ens2("search --train " + shq(testing::demo("linear_train.csv")) + " --target nope --out " +
                          shq(dir / "run"));
  EXPECT_EQ(r.exit_code, kCliUsage) << r.output;
  EXPECT_NE(r.output.find("unknown target column 'nope'"), std::string::npos) << r.output;
}

TEST(Cli, UnknownWorkerIsBadInput) {
  testing::TempDir dir;
  const auto r = run_ens2(search_args(dir / "run", "--workers grid,bogus"));
  EXPECT_EQ(r.exit_code, kCliUsage);
  EXPECT_NE(r.output.find("unknown worker 'bogus'"), std::string::npos) << r.output;
}

TEST(Cli, EveryWorkerFailingExitsWithThree) {
  testing::TempDir dir;
  const std::string cfg = "[[worker]]\nid = \"grid\"\nkind = \"grid\"\ncommand = [\"" + std::string(ENS2_FAKE_WORKER) +
                          "\", \"fail\"]\n";
  write_file_atomic(dir / "workers.toml", cfg);
  const auto r = run_ens2(search_args(dir / "run", "--config " + shq(dir / "workers.toml")));
  EXPECT_EQ(r.exit_code, kCliTaskFailure) << r.output;
  EXPECT_NE(r.output.find("meta-search failed"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("grid: failed"), std::string::npos) << r.output;
}

TEST(Cli, PredictWithMissingArtifactsExitsWithTwo) {
  testing::TempDir dir;
  const auto r = run_ens2("predict --run " + shq(dir / "nothing") + " --test " +
                          shq(testing::demo("linear_test.csv")));
  EXPECT_EQ(r.exit_code, kCliUsage);
  EXPECT_NE(r.output.find("missing run artifacts"), std::string::npos) << r.output;
}

TEST_F(CliTest, SearchWritesSummaryAndLeaderboard) {
  const std::string summary = read_file(run() / "summary.txt");
  EXPECT_NE(summary.find("grid: complete"), std::string::npos) << summary;
  EXPECT_NE(summary.find("random: complete"), std::string::npos) << summary;
  EXPECT_NE(summary.find("halving: complete"), std::string::npos) << summary;
  EXPECT_TRUE(std::regex_search(summary, std::regex(R"(leaderboard \(\d+ pipelines\):\n  1\. )"))) << summary;
}

TEST_F(CliTest, VotingPredictionWritesFinalCsv) {
  testing::TempDir out;
  const auto r = run_ens2("predict --run " + shq(run()) + " --test " + shq(testing::demo("linear_test.csv")) +
                          " --out " + shq(out / "p.csv"));
  ASSERT_EQ(r.exit_code, kCliOk) << r.output;
  EXPECT_NE(r.output.find("wrote 240 predictions"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("(voting)"), std::string::npos);
  const std::string csv = read_file(out / "p.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "row_index,predicted_label");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 241);
}

TEST_F(CliTest, OversizedKWarnsButSucceeds) {
  const auto r = run_ens2("predict --run " + shq(run()) + " --test " + shq(testing::demo("linear_test.csv")) +
                          " --k 500");
  EXPECT_EQ(r.exit_code, kCliOk) << r.output;
  EXPECT_NE(r.output.find("warning: k=500 exceeds"), std::string::npos) << r.output;
}

TEST_F(CliTest, StackingPrediction) {
  const auto r = run_ens2("predict --run " + shq(run()) + " --test " + shq(testing::demo("linear_test.csv")) +
                          " --mode stacking");
  EXPECT_EQ(r.exit_code, kCliOk) << r.output;
  EXPECT_NE(r.output.find("(stacking)"), std::string::npos);
}

TEST_F(CliTest, StackingWithoutOofExitsWithThree) {
  testing::TempDir copy;
  fs::copy(run(), copy / "run", fs::copy_options::recursive);
  std::string merged = read_file(copy / "run" / "merged.ndjson");
  merged = std::regex_replace(merged, std::regex("\"has_oof\":true"), "\"has_oof\":false");
  write_file_atomic(copy / "run" / "merged.ndjson", merged);
  const auto r = run_ens2("predict --run " + shq(copy / "run") + " --test " +
                          shq(testing::demo("linear_test.csv")) + " --mode stacking");
  EXPECT_EQ(r.exit_code, kCliTaskFailure) << r.output;
  EXPECT_NE(r.output.find("stacker has no base learners"), std::string::npos) << r.output;
}

TEST_F(CliTest, TestSetMissingAColumnExitsWithTwo) {
  testing::TempDir dir;
  write_file_atomic(dir / "t.csv", "x1,x2,x3\n0.1,0.2,0.3\n");
  const auto r = run_ens2("predict --run " + shq(run()) + " --test " + shq(dir / "t.csv"));
  EXPECT_EQ(r.exit_code, kCliUsage) << r.output;
  EXPECT_NE(r.output.find("test data is missing feature columns: x4"), std::string::npos) << r.output;
}

TEST(Cli, BenchmarkRebuildsReportFromScores) {
  testing::TempDir dir;
  write_file_atomic(dir / "scores.csv",
                    "system,dataset,seed,accuracy,status\nA,d0,0,0.9,ok\nB,d0,0,0.7,ok\nA,d0,1,0.8,ok\nB,d0,1,,FAILED\n");
  const auto r = run_ens2("benchmark --from-scores " + shq(dir / "scores.csv") + " --out " + shq(dir / "rep"));
  ASSERT_EQ(r.exit_code, kCliOk) << r.output;
  EXPECT_EQ(read_file(dir / "rep" / "scores.csv"), read_file(dir / "scores.csv"));
  EXPECT_NE(read_file(dir / "rep" / "report.md").find("- B on d0, seed 1"), std::string::npos);
  EXPECT_EQ(run_ens2("benchmark --out " + shq(dir / "rep2")).exit_code, kCliUsage);
}

}  // namespace
}  // namespace ens2
