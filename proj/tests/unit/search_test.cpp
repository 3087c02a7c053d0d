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
#include <set>

#include "ens2/artifacts.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/search.hpp"
#include "test_support.hpp"

namespace ens2 {
namespace {

TaskSpec spec_with_seed(std::uint64_t seed) {
  TaskSpec s;
  s.target = "label";
  s.seed = seed;
  return s;
}

Dataset demo_train(const std::string& name) {
  return read_csv_file(testing::demo(name + "_train.csv"), std::string("label"));
}

TEST(GridSearch, EnumeratesEveryCandidateOnce) {
  EXPECT_EQ(grid_template_candidates().size(), 26u);
  const auto report = grid_template_search(demo_train("linear"), spec_with_seed(0), {.searcher_id = "grid"});
  EXPECT_EQ(report.status, SearchStatus::kComplete);
  ASSERT_EQ(report.pipelines.size(), 26u);
  for (std::size_t i = 0; i < report.pipelines.size(); ++i) {
    const auto& rec = report.pipelines[i];
    EXPECT_EQ(rec.id, pipeline_id_for("grid", i));
    EXPECT_EQ(rec.discovered_at, i);
    EXPECT_TRUE(rec.has_oof);
    EXPECT_EQ(rec.steps, grid_template_candidates()[i].steps);
    EXPECT_NO_THROW(rec.validate());
  }
}

TEST(GridSearch, DeterministicAcrossRuns) {
  const Dataset d = demo_train("xor");
  const auto a = grid_template_search(d, spec_with_seed(4), {.searcher_id = "g"});
  const auto b = grid_template_search(d, spec_with_seed(4), {.searcher_id = "g"});
  EXPECT_EQ(a.pipelines, b.pipelines);
  EXPECT_EQ(a.oof, b.oof);
}

TEST(Searchers, PastDeadlineFails) {
  const Dataset d = demo_train("linear");
  const SearchControl control{.searcher_id = "s", .deadline = Clock::now() - std::chrono::seconds(1)};
  for (auto kind : {SearcherKind::kGridTemplate, SearcherKind::kRandom, SearcherKind::kSuccessiveHalving}) {
    const auto report = run_search_strategy(kind, d, spec_with_seed(0), control);
    EXPECT_EQ(report.status, SearchStatus::kFailed) << to_string(kind);
    EXPECT_EQ(report.reason, "budget too small");
    EXPECT_TRUE(report.pipelines.empty());
  }
}

TEST(Searchers, StopRequestEndsSearchEarly) {
  std::size_t seen = 0;
  SearchControl control{.searcher_id = "s"};
  control.on_candidate = [&](const PipelineRecord&, const PredictionMatrix*) { ++seen; };
  control.stop_requested = [&] { return seen >= 3; };
  const auto report = grid_template_search(demo_train("linear"), spec_with_seed(0), control);
  EXPECT_EQ(report.status, SearchStatus::kBudgetExhausted);
  EXPECT_EQ(report.pipelines.size(), 3u);
}

TEST(RandomSearch, SameSeedSameSequence) {
  Rng a(derive_seed(9, 10)), b(derive_seed(9, 10));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_candidate(a), sample_candidate(b));
  const Dataset d = demo_train("linear");
  const auto r1 = random_search(d, spec_with_seed(9), {.searcher_id = "r", .random_candidates = 10});
  const auto r2 = random_search(d, spec_with_seed(9), {.searcher_id = "r", .random_candidates = 10});
  EXPECT_EQ(r1.pipelines, r2.pipelines);
}

TEST(RandomSearch, DifferentSeedsDiffer) {
  Rng a(derive_seed(1, 10)), b(derive_seed(2, 10));
  std::size_t differences = 0;
  for (int i = 0; i < 20; ++i) differences += !(sample_candidate(a) == sample_candidate(b));
  EXPECT_GE(differences, 1u);
}

TEST(SuccessiveHalving, RungsHalveToOneSurvivor) {
  const auto report = successive_halving_search(demo_train("noisy_cat"), spec_with_seed(3), {.searcher_id = "h"});
  EXPECT_EQ(report.status, SearchStatus::kComplete);
  EXPECT_EQ(report.rung_sizes, (std::vector<std::size_t>{16, 8, 4, 2, 1}));
  ASSERT_EQ(report.pipelines.size(), 16u);
  const auto oof_count = std::count_if(report.pipelines.begin(), report.pipelines.end(),
                                       [](const PipelineRecord& r) { return r.has_oof; });
  EXPECT_EQ(oof_count, 1);
  // The rung 0 losers are emitted first, without OOF.
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_FALSE(report.pipelines[i].has_oof);
    EXPECT_FALSE(report.oof[i].has_value());
  }
  EXPECT_TRUE(report.pipelines.back().has_oof);
}

TEST(SuccessiveHalving, DeterministicForSeed) {
  const Dataset d = demo_train("xor");
  const auto a = successive_halving_search(d, spec_with_seed(5), {.searcher_id = "h"});
  const auto b = successive_halving_search(d, spec_with_seed(5), {.searcher_id = "h"});
  EXPECT_EQ(a.pipelines, b.pipelines);
}

TEST(SuccessiveHalving, CohortSizeIsConfigurable) {
  const auto report =
      successive_halving_search(demo_train("linear"), spec_with_seed(1), {.searcher_id = "h", .halving_cohort = 4});
  EXPECT_EQ(report.rung_sizes, (std::vector<std::size_t>{4, 2, 1}));
}

// Every OOF matrix covers each row exactly once with the model that did not
// train on it; a fold observer records the row sets handed to each fit.
TEST(SearchersProperty, OofCoverageAndNoLeakage) {
  for (const auto& name : {"linear", "xor", "noisy_cat"}) {
    const Dataset d = demo_train(name);
    for (auto kind : {SearcherKind::kGridTemplate, SearcherKind::kRandom, SearcherKind::kSuccessiveHalving}) {
      std::size_t fits = 0;
      std::vector<std::size_t> predicted_count(d.num_rows(), 0);
      SearchControl control{.searcher_id = std::string(to_string(kind))};
      control.fold_observer = [&](std::size_t, std::span<const std::size_t> tr, std::span<const std::size_t> pr) {
        ++fits;
        std::set<std::size_t> train_set(tr.begin(), tr.end());
        for (auto r : pr) ASSERT_FALSE(train_set.contains(r)) << "row " << r << " leaked";
        ASSERT_EQ(tr.size() + pr.size(), d.num_rows());
        for (auto r : pr) ++predicted_count[r];
      };
      const auto report = run_search_strategy(kind, d, spec_with_seed(2), control);
      std::size_t oof_pipelines = 0;
      for (std::size_t i = 0; i < report.pipelines.size(); ++i) {
        ASSERT_EQ(report.pipelines[i].has_oof, report.oof[i].has_value());
        if (!report.oof[i]) continue;
        ++oof_pipelines;
        const auto& m = *report.oof[i];
        ASSERT_EQ(m.rows(), d.num_rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
          double sum = 0.0;
          for (std::size_t c = 0; c < m.cols(); ++c) sum += m(r, c);
          ASSERT_NEAR(sum, 1.0, 1e-9);
        }
      }
      ASSERT_GT(oof_pipelines, 0u);
      ASSERT_EQ(report.failed_candidates, 0u);
      // Each CV evaluation runs kSearchFolds fits that predict every row once.
      EXPECT_EQ(fits, oof_pipelines * kSearchFolds);
      for (auto c : predicted_count) ASSERT_EQ(c, oof_pipelines);
    }
  }
}

TEST(SearchersProperty, NoCandidateStartsAfterDeadline) {
  const Dataset d = demo_train("noisy_cat");
  const auto deadline = Clock::now() + std::chrono::milliseconds(150);
  std::vector<Clock::time_point> starts;
  SearchControl control{.searcher_id = "g", .deadline = deadline};
  control.fold_observer = [&](std::size_t fold, std::span<const std::size_t>, std::span<const std::size_t>) {
    if (fold == 0) starts.push_back(Clock::now());
  };
  const auto report = grid_template_search(d, spec_with_seed(0), control);
  for (const auto& t : starts) EXPECT_LT(t, deadline);
  EXPECT_EQ(report.pipelines.size(), starts.size());
}

TEST(ArtifactStore, RecordsOofAndModelsRoundTrip) {
  testing::TempDir dir;
  const ArtifactStore store(dir.path());
  const Dataset d = demo_train("linear");
  auto report = grid_template_search(d, spec_with_seed(0), {.searcher_id = "grid"});
  for (std::size_t i = 0; i < 3; ++i) {
    store.append_record(report.pipelines[i]);
    store.write_oof(report.pipelines[i].id, *report.oof[i], d.label_vocab());
  }
  refit_best(report, d, store, Clock::now() + std::chrono::seconds(30), 2);
  const auto loaded = store.load_records();
  ASSERT_EQ(loaded.size(), 3u);
  std::size_t with_artifact = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded[i].id, report.pipelines[i].id);
    EXPECT_EQ(loaded[i].validation_score, report.pipelines[i].validation_score);
    EXPECT_TRUE(loaded[i].has_oof);
    EXPECT_EQ(store.load_oof(loaded[i].id), *report.oof[i]);
    with_artifact += !loaded[i].artifact_ref.empty();
  }
  // refit_best picks the two best across all 26, which may lie outside the first three.
  std::size_t refit_total = 0;
  for (const auto& r : report.pipelines) refit_total += !r.artifact_ref.empty();
  EXPECT_EQ(refit_total, 2u);
  EXPECT_LE(with_artifact, 2u);
}

TEST(ArtifactStore, TornTrailingLineIsDropped) {
  testing::TempDir dir;
  const ArtifactStore store(dir.path());
  PipelineRecord rec{.id = "x-0000", .searcher_id = "x", .steps = {{"knn", {{"k", std::int64_t{3}}}}},
                     .validation_score = 0.5};
  store.append_record(rec);
  rec.id = "x-0001";
  store.append_record(rec);
  const std::string full = read_file(dir.path() / "pipelines.ndjson");
  write_file_atomic(dir.path() / "pipelines.ndjson", full.substr(0, full.size() - 7));
  const auto loaded = store.load_records();
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].id, "x-0000");
}

TEST(ArtifactStore, ProbabilityCsvKeepsBitsAndVocabulary) {
  PredictionMatrix m(2, 2);
  m.data() = {0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0};
  const std::string csv = probabilities_to_csv(m, {"neg", "pos"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "row_index,p_neg,p_pos");
  std::vector<std::string> vocab;
  EXPECT_EQ(probabilities_from_csv(csv, &vocab), m);
  EXPECT_EQ(vocab, (std::vector<std::string>{"neg", "pos"}));
  const auto padded = probabilities_from_csv(csv, nullptr, 3);
  EXPECT_EQ(padded.rows(), 3u);
  EXPECT_TRUE(std::isnan(padded(2, 0)));
  EXPECT_THROW(probabilities_from_csv(csv, nullptr, 1), Error);
}

}  // namespace
}  // namespace ens2
