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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/orchestrator.hpp"
#include "ens2/rng.hpp"
#include "test_support.hpp"

namespace ens2 {
namespace {

namespace fs = std::filesystem;

PipelineRecord rec(const std::string& id, const std::string& searcher, double score, std::uint64_t at,
                   bool oof = true) {
  PipelineRecord r;
  r.id = id;
  r.searcher_id = searcher;
  r.steps.push_back({"dummy_majority", {}});
  r.validation_score = score;
  r.has_oof = oof;
  r.discovered_at = at;
  return r;
}

std::vector<std::string> ids(const std::vector<PipelineRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

SearchPlan plan_with(std::vector<WorkerSpec> workers, double budget = 30.0, double grace = 2.0) {
  SearchPlan plan;
  plan.workers = std::move(workers);
  plan.time_budget_s = budget;
  plan.grace_period_s = grace;
  plan.seed = 11;
  return plan;
}

OrchestratorOptions options() {
  OrchestratorOptions o;
  o.worker_command = testing::worker_command();
  return o;
}

WorkerSpec faulty(const std::string& id, SearcherKind kind, const std::string& mode) {
  return {id, kind, testing::fake_worker(mode)};
}

Dataset linear_train() { return read_csv_file(testing::demo("linear_train.csv"), "label"); }

TEST(Rank, OrdersByScoreThenDiscoveryThenSearcherThenId) {
  const auto ranked = rank_pipelines({rec("b-1", "b", 0.8, 2), rec("a-2", "a", 0.9, 5), rec("a-1", "a", 0.8, 2),
                                      rec("c-1", "c", 0.8, 1), rec("a-0", "a", 0.8, 2)});
  EXPECT_EQ(ids(ranked), (std::vector<std::string>{"a-2", "c-1", "a-0", "a-1", "b-1"}));
}

TEST(Rank, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(rank_pipelines({}), Error);
  EXPECT_THROW(rank_pipelines({rec("a", "a", std::numeric_limits<double>::quiet_NaN(), 0)}), Error);
}

TEST(RankProperty, PermutationInvariantAndSorted) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PipelineRecord> records;
    const std::size_t n = 1 + rng.uniform_index(25);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string sid = std::string(1, static_cast<char>('a' + rng.uniform_index(3)));
      records.push_back(rec(sid + "-" + std::to_string(i), sid, static_cast<double>(rng.uniform_index(4)) / 4.0,
                            rng.uniform_index(5)));
    }
    const auto ranked = rank_pipelines(records);
    std::vector<PipelineRecord> shuffled = records;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    ASSERT_EQ(rank_pipelines(shuffled), ranked);
    for (std::size_t i = 1; i < ranked.size(); ++i) ASSERT_GE(ranked[i - 1].validation_score, ranked[i].validation_score);
  }
}

TEST(Select, TopKClampsToAvailable) {
  const auto ranked = rank_pipelines({rec("a", "a", 0.9, 0), rec("b", "b", 0.8, 0)});
  EXPECT_EQ(ids(select_top_k(ranked, 1)), std::vector<std::string>{"a"});
  EXPECT_EQ(select_top_k(ranked, 5).size(), 2u);
}

TEST(Select, BestPerSearcherSkipsLearnersWithoutOof) {
  const auto ranked = rank_pipelines({rec("h-1", "h", 0.95, 0, false), rec("g-1", "g", 0.9, 0), rec("g-2", "g", 0.85, 1),
                                      rec("h-2", "h", 0.8, 1), rec("r-1", "r", 0.7, 0)});
  std::vector<std::string> warnings;
  EXPECT_EQ(ids(select_best_per_searcher(ranked, &warnings)), (std::vector<std::string>{"g-1", "r-1"}));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("searcher h excluded"), std::string::npos);
  try {
    select_best_per_searcher({rec("h-1", "h", 0.9, 0, false)});
    FAIL();
  } catch (const TaskError& e) {
    EXPECT_STREQ(e.what(), "stacker has no base learners");
  }
}

TEST(Plan, ValidationAndGraceDefault) {
  SearchPlan plan = plan_with(default_workers());
  EXPECT_NO_THROW(plan.validate());
  plan.grace_period_s.reset();
  plan.time_budget_s = 20;
  EXPECT_EQ(plan.grace_s(), 5.0);
  plan.time_budget_s = 120;
  EXPECT_EQ(plan.grace_s(), 12.0);
  SearchPlan bad = plan;
  bad.workers.push_back(bad.workers.front());
  EXPECT_THROW(bad.validate(), Error);
  bad = plan;
  bad.workers[0].searcher_id = "bad id";
  EXPECT_THROW(bad.validate(), Error);
  bad = plan;
  bad.time_budget_s = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = plan;
  bad.refit_fraction = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = plan;
  bad.k_top = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad.workers.clear();
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Plan, JsonRoundTrip) {
  SearchPlan plan = plan_with({faulty("x", SearcherKind::kRandom, "crash"), {"grid", SearcherKind::kGridTemplate, {}}});
  plan.metric = Metric::kLogloss;
  plan.retry_failed = true;
  EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);
  plan.grace_period_s.reset();
  EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);
  EXPECT_THROW(plan_from_json("{}"), ParseError);
}

TEST(RunSearch, HealthyWorkersMergeIntoOneRankedUnion) {
  testing::TempDir dir;
  std::set<std::string> seen_envelopes;
  OrchestratorOptions opts = options();
  opts.on_envelope = [&](const std::string& sid, const protocol::Envelope&) { seen_envelopes.insert(sid); };
  const auto outcome = run_search(linear_train(), plan_with(default_workers()), dir / "run", opts);
  ASSERT_TRUE(outcome.succeeded());
  std::size_t total = 0;
  for (const auto& w : outcome.workers) {
    EXPECT_EQ(w.status, WorkerStatus::kComplete) << w.searcher_id << ": " << w.diagnostics;
    total += w.pipelines;
  }
  EXPECT_EQ(outcome.merged.size(), total);
  EXPECT_EQ(seen_envelopes, (std::set<std::string>{"grid", "halving", "random"}));
  EXPECT_EQ(rank_pipelines(outcome.merged), outcome.merged);
  for (const auto& r : outcome.merged) {
    if (!r.artifact_ref.empty()) {
      EXPECT_TRUE(fs::exists(dir / "run" / r.artifact_ref)) << r.artifact_ref;
    }
  }
  const auto loaded = SearchOutcome::load(dir / "run");
  EXPECT_EQ(loaded.merged, outcome.merged);
  EXPECT_EQ(loaded.plan, outcome.plan);
  EXPECT_EQ(loaded.target, "label");
  EXPECT_EQ(loaded.run_id, "run");
}

TEST(RunSearch, CrashedWorkerIsIsolated) {
  testing::TempDir dir;
  auto workers = default_workers();
  workers[1] = faulty("random", SearcherKind::kRandom, "crash");
  const auto outcome = run_search(linear_train(), plan_with(workers), dir / "run", options());
  EXPECT_EQ(outcome.workers[1].status, WorkerStatus::kFailed);
  EXPECT_NE(outcome.workers[1].diagnostics.find("signal 9"), std::string::npos) << outcome.workers[1].diagnostics;
  EXPECT_EQ(outcome.workers[0].status, WorkerStatus::kComplete);
  EXPECT_EQ(outcome.workers[2].status, WorkerStatus::kComplete);
  for (const auto& r : outcome.merged) EXPECT_NE(r.searcher_id, "random");
}

TEST(RunSearch, GarbageOutputCountsAsFailure) {
  testing::TempDir dir;
  auto workers = default_workers();
  workers[0] = faulty("grid", SearcherKind::kGridTemplate, "garbage");
  const auto outcome = run_search(linear_train(), plan_with(workers), dir / "run", options());
  EXPECT_EQ(outcome.workers[0].status, WorkerStatus::kFailed);
  EXPECT_NE(outcome.workers[0].diagnostics.find("malformed"), std::string::npos) << outcome.workers[0].diagnostics;
}

TEST(RunSearch, HungWorkerIsKilledAndItsArtifactsRecovered) {
  testing::TempDir dir;
  auto workers = default_workers();
  workers[0] = faulty("grid", SearcherKind::kGridTemplate, "hang");
  const double budget = 4.0, grace = 1.0;
  const auto start = std::chrono::steady_clock::now();
  const auto outcome = run_search(linear_train(), plan_with(workers, budget, grace), dir / "run", options());
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LE(elapsed, budget + grace + 2.0);
  const auto& hung = outcome.workers[0];
  EXPECT_EQ(hung.status, WorkerStatus::kRecoveredPartial) << hung.diagnostics;
  EXPECT_EQ(hung.pipelines, 4u);
  EXPECT_NE(hung.diagnostics.find("force-killed"), std::string::npos) << hung.diagnostics;
  const auto n = std::count_if(outcome.merged.begin(), outcome.merged.end(),
                               [](const PipelineRecord& r) { return r.searcher_id == "grid"; });
  EXPECT_EQ(n, 4);
}

TEST(RunSearch, EveryWorkerFailingIsATaskError) {
  testing::TempDir dir;
  const SearchPlan plan = plan_with({faulty("grid", SearcherKind::kGridTemplate, "fail"),
                                     faulty("random", SearcherKind::kRandom, "crash")});
  try {
    run_search(linear_train(), plan, dir / "run", options());
    FAIL();
  } catch (const TaskError& e) {
    EXPECT_NE(std::string(e.what()).find("meta-search failed"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("injected failure"), std::string::npos);
  }
  const auto loaded = SearchOutcome::load(dir / "run");
  EXPECT_FALSE(loaded.succeeded());
  EXPECT_EQ(loaded.workers.size(), 2u);
}

TEST(RunSearch, RetryRerunsFailedWorkersOnce) {
  testing::TempDir dir;
  SearchPlan plan = plan_with({faulty("grid", SearcherKind::kGridTemplate, "fail"), {"random", SearcherKind::kRandom, {}}});
  plan.retry_failed = true;
  const auto outcome = run_search(linear_train(), plan, dir / "run", options());
  EXPECT_TRUE(outcome.workers[0].retried);
  EXPECT_FALSE(outcome.workers[1].retried);
  EXPECT_EQ(outcome.workers[0].status, WorkerStatus::kFailed);
}

TEST(RunSearch, SameSeedGivesTheSameLeaderboard) {
  testing::TempDir dir;
  const auto a = run_search(linear_train(), plan_with(default_workers()), dir / "a", options());
  const auto b = run_search(linear_train(), plan_with(default_workers()), dir / "b", options());
  EXPECT_EQ(a.merged, b.merged);
  EXPECT_EQ(read_file(dir / "a" / "merged.ndjson"), read_file(dir / "b" / "merged.ndjson"));
}

// Losing a worker removes exactly its records from the union.
TEST(RunSearchProperty, FailuresOnlyRemoveTheFailedWorkersRecords) {
  testing::TempDir dir;
  const auto full = run_search(linear_train(), plan_with(default_workers()), dir / "full", options());
  for (std::size_t lost = 0; lost < 3; ++lost) {
    auto workers = default_workers();
    const std::string sid = workers[lost].searcher_id;
    workers[lost] = faulty(sid, workers[lost].kind, "crash");
    const auto partial = run_search(linear_train(), plan_with(workers), dir / ("lost-" + sid), options());
    std::vector<PipelineRecord> expected;
    for (const auto& r : full.merged) {
      if (r.searcher_id != sid) expected.push_back(r);
    }
    EXPECT_EQ(partial.merged, expected) << sid;
    EXPECT_LT(partial.merged.size(), full.merged.size());
  }
}

class PredictTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    outcome_ = new SearchOutcome(run_search(linear_train(), plan_with(default_workers()), *dir_ / "run", options()));
  }
  static void TearDownTestSuite() {
    delete outcome_;
    delete dir_;
  }

  static Dataset test_set() { return read_csv_file(testing::demo("linear_test.csv"), std::nullopt); }

  static PredictOptions popts(EnsembleMode mode, std::size_t k, const std::string& tag) {
    PredictOptions o;
    o.mode = mode;
    o.k = k;
    o.worker_command = testing::worker_command();
    o.tag = tag;
    return o;
  }

  static testing::TempDir* dir_;
  static SearchOutcome* outcome_;
};

testing::TempDir* PredictTest::dir_ = nullptr;
SearchOutcome* PredictTest::outcome_ = nullptr;

TEST_F(PredictTest, VotingUsesTheTopRefitPipelines) {
  const auto result = run_predict(*outcome_, test_set(), popts(EnsembleMode::kVoting, 3, "vote"));
  EXPECT_EQ(result.labels.size(), 240u);
  std::vector<std::string> refit;
  for (const auto& r : outcome_->merged) {
    if (!r.artifact_ref.empty()) refit.push_back(r.id);
  }
  refit.resize(3);
  EXPECT_EQ(result.used_pipelines, refit);
  EXPECT_TRUE(result.warnings.empty());
  EXPECT_EQ(read_file(result.final_csv), final_predictions_csv(result.labels));
  const std::string committee = read_file(result.final_csv.parent_path() / "committee.txt");
  EXPECT_EQ(committee.substr(0, 4), "k 3\n");
  const Dataset labeled = read_csv_file(testing::demo("linear_test.csv"), "label");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    hits += result.labels[i] == labeled.label_vocab()[(*labeled.labels())[i]];
  }
  EXPECT_GE(static_cast<double>(hits) / 240.0, 0.8);
}

TEST_F(PredictTest, OversizedKWarnsAndUsesEveryRefitPipeline) {
  const auto result = run_predict(*outcome_, test_set(), popts(EnsembleMode::kVoting, 1000, "big"));
  ASSERT_FALSE(result.warnings.empty());
  EXPECT_NE(result.warnings[0].find("k=1000 exceeds"), std::string::npos);
  const auto refit = std::count_if(outcome_->merged.begin(), outcome_->merged.end(),
                                   [](const PipelineRecord& r) { return !r.artifact_ref.empty(); });
  EXPECT_EQ(static_cast<long>(result.used_pipelines.size()), refit);
}

TEST_F(PredictTest, StackingUsesOneLearnerPerSearcherWithOof) {
  const auto result = run_predict(*outcome_, test_set(), popts(EnsembleMode::kStacking, 3, "stack"));
  EXPECT_EQ(result.labels.size(), 240u);
  std::vector<std::string> warnings;
  EXPECT_EQ(result.used_pipelines, ids(select_best_per_searcher(outcome_->merged, &warnings)));
  EXPECT_TRUE(fs::exists(result.final_csv.parent_path() / "stacker.json"));
}

TEST_F(PredictTest, MissingFeatureColumnIsAParseError) {
  Dataset test = read_csv_file(testing::demo("linear_test.csv"), std::nullopt);
  const std::string csv = to_csv(test);
  // Drop the first column from every line.
  std::string cut;
  std::size_t start = 0;
  while (start < csv.size()) {
    const std::size_t nl = csv.find('\n', start);
    const std::string line = csv.substr(start, nl - start);
    cut += line.substr(line.find(',') + 1) + "\n";
    start = nl + 1;
  }
  EXPECT_THROW(run_predict(*outcome_, parse_csv(cut, std::nullopt), popts(EnsembleMode::kVoting, 3, "cut")),
               ParseError);
}

TEST_F(PredictTest, PredictFailuresEverywhereAreATaskError) {
  auto o = popts(EnsembleMode::kVoting, 3, "failing");
  o.worker_command = testing::fake_worker("fail-predict");
  EXPECT_THROW(run_predict(*outcome_, test_set(), o), TaskError);
  o.mode = EnsembleMode::kStacking;
  EXPECT_THROW(run_predict(*outcome_, test_set(), o), TaskError);
}

// Mutates a private copy of the run so the shared fixture stays intact.
TEST_F(PredictTest, DeletedModelIsReplacedByTheNextRanked) {
  testing::TempDir copy;
  fs::copy(outcome_->run_dir, copy / "run", fs::copy_options::recursive);
  const SearchOutcome local = SearchOutcome::load(copy / "run");
  std::vector<PipelineRecord> refit;
  for (const auto& r : local.merged) {
    if (!r.artifact_ref.empty()) refit.push_back(r);
  }
  ASSERT_GE(refit.size(), 4u);
  fs::remove(copy / "run" / refit[0].artifact_ref);
  const auto result = run_predict(local, test_set(), popts(EnsembleMode::kVoting, 3, "replaced"));
  EXPECT_EQ(result.used_pipelines, (std::vector<std::string>{refit[1].id, refit[2].id, refit[3].id}));
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("pipeline " + refit[0].id + " failed to predict"), std::string::npos);
  EXPECT_NE(result.warnings[0].find("promoting the next-ranked pipeline"), std::string::npos);
}

TEST_F(PredictTest, LearnerWithBrokenOofIsDroppedFromTheStacker) {
  testing::TempDir copy;
  fs::copy(outcome_->run_dir, copy / "run", fs::copy_options::recursive);
  const SearchOutcome local = SearchOutcome::load(copy / "run");
  const auto roster = select_best_per_searcher(local.merged);
  ASSERT_GE(roster.size(), 2u);
  fs::remove(copy / "run" / "workers" / roster[0].searcher_id / "oof" / (roster[0].id + ".csv"));
  const auto result = run_predict(local, test_set(), popts(EnsembleMode::kStacking, 3, "drop"));
  EXPECT_EQ(std::find(result.used_pipelines.begin(), result.used_pipelines.end(), roster[0].id),
            result.used_pipelines.end());
  EXPECT_EQ(result.used_pipelines.size(), roster.size() - 1);
  bool warned = false;
  for (const auto& w : result.warnings) warned |= w.find("dropped from the stacker") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(FinalCsv, HeaderAndEscaping) {
  EXPECT_EQ(final_predictions_csv({"a", "b,c"}), "row_index,predicted_label\n0,a\n1,\"b,c\"\n");
}

}  // namespace
}  // namespace ens2
