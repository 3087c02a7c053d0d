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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ens2/ensemble.hpp"
#include "ens2/protocol.hpp"
#include "ens2/search.hpp"
#include "ens2/tabular.hpp"

namespace ens2 {

// Run directory layout:
//
//   plan.json                 the SearchPlan
//   train.csv                 training data as handed to the workers
//   train.manifest.json
//   workers/<searcher_id>/    one ArtifactStore per worker, plus worker.log
//   merged.ndjson             ranked records, artifact_ref relative to the run
//   outcome.json              per-worker status and diagnostics
//   predictions/              per-pipeline prediction CSVs and final.csv

struct WorkerSpec {
  std::string searcher_id;
  SearcherKind kind = SearcherKind::kGridTemplate;
  // Overrides the default worker command when non-empty.
  std::vector<std::string> command;

  bool operator==(const WorkerSpec&) const = default;
};

struct SearchPlan {
  std::vector<WorkerSpec> workers;
  Metric metric = Metric::kAccuracy;
  double time_budget_s = 60.0;
  // Default: max(5 s, 10% of the budget).
  std::optional<double> grace_period_s;
  double refit_fraction = 0.25;
  std::uint64_t seed = 0;
  std::size_t k_top = 3;
  // Re-run a failed worker once with the same request.
  bool retry_failed = false;

  void validate() const;  // throws Error
  double grace_s() const;

  bool operator==(const SearchPlan&) const = default;
};

// The default roster: one worker per searcher kind, named after the kind.
std::vector<WorkerSpec> default_workers();

std::string plan_to_json(const SearchPlan& plan);
SearchPlan plan_from_json(std::string_view text);

enum class WorkerStatus { kComplete, kRecoveredPartial, kFailed };

std::string_view to_string(WorkerStatus status);
WorkerStatus worker_status_from_string(std::string_view s);

struct WorkerOutcome {
  std::string searcher_id;
  WorkerStatus status = WorkerStatus::kFailed;
  int exit_code = -1;
  bool retried = false;
  std::size_t pipelines = 0;
  double elapsed_s = 0.0;
  double max_silence_s = 0.0;
  std::string diagnostics;
};

struct SearchOutcome {
  std::string run_id;
  std::filesystem::path run_dir;
  SearchPlan plan;
  std::string target;
  std::vector<WorkerOutcome> workers;
  // Ranked; non-empty exactly when some worker did not fail.
  std::vector<PipelineRecord> merged;

  bool succeeded() const { return !merged.empty(); }

  // Reads outcome.json and merged.ndjson. Throws Error when either is missing.
  static SearchOutcome load(const std::filesystem::path& run_dir);
};

struct OrchestratorOptions {
  // Command that starts a worker, e.g. {"/usr/bin/ens2", "worker"}.
  std::vector<std::string> worker_command;
  // Invoked from the supervising thread for every envelope a worker emits.
  std::function<void(const std::string& searcher_id, const protocol::Envelope&)> on_envelope;
};

// Starts every worker concurrently with the same budget and seed, stops
// stragglers and recovers whatever they published. Writes the run directory.
// Throws TaskError("meta-search failed ...") when no worker produced a
// pipeline; outcome.json is still written in that case.
SearchOutcome run_search(const Dataset& train, const SearchPlan& plan, const std::filesystem::path& run_dir,
                         const OrchestratorOptions& options);

// Orders by validation_score desc, discovered_at asc, searcher_id asc, then
// id asc. Throws Error on empty input or a non-finite score.
std::vector<PipelineRecord> rank_pipelines(std::vector<PipelineRecord> records);

std::vector<PipelineRecord> select_top_k(const std::vector<PipelineRecord>& ranked, std::size_t k);

// Highest-ranked record of each searcher, in ranking order. Searchers whose
// best record has no OOF predictions are skipped with a warning. Throws
// TaskError("stacker has no base learners") when nothing remains.
std::vector<PipelineRecord> select_best_per_searcher(const std::vector<PipelineRecord>& ranked,
                                                     std::vector<std::string>* warnings = nullptr);

enum class EnsembleMode { kVoting, kStacking };

std::string_view to_string(EnsembleMode mode);
EnsembleMode ensemble_mode_from_string(std::string_view s);

struct PredictOptions {
  EnsembleMode mode = EnsembleMode::kVoting;
  std::size_t k = 3;
  std::vector<std::string> worker_command;
  StackerOptions stacker;
  // Subdirectory of predictions/ for this request; empty writes directly.
  std::string tag;
};

struct PredictOutcome {
  std::vector<std::string> labels;  // one per test row
  std::vector<std::string> used_pipelines;
  std::vector<std::string> warnings;
  std::filesystem::path final_csv;
};

// Predicts with the selected pipelines in parallel and combines them. `test`
// is aligned against the run's training data first; a missing feature
// column throws ParseError. Throws TaskError when no pipeline predicted.
PredictOutcome run_predict(const SearchOutcome& outcome, const Dataset& test, const PredictOptions& options);

// row_index,predicted_label CSV.
std::string final_predictions_csv(const std::vector<std::string>& labels);

}  // namespace ens2
