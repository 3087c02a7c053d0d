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

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ens2/artifacts.hpp"
#include "ens2/matrix.hpp"
#include "ens2/pipeline.hpp"
#include "ens2/rng.hpp"
#include "ens2/stats.hpp"
#include "ens2/tabular.hpp"

namespace ens2 {

using Clock = std::chrono::steady_clock;

enum class SearcherKind { kGridTemplate, kRandom, kSuccessiveHalving };

std::string_view to_string(SearcherKind kind);  // "grid", "random", "halving"
SearcherKind searcher_kind_from_string(std::string_view s);

enum class SearchStatus { kComplete, kBudgetExhausted, kFailed };

std::string_view to_string(SearchStatus status);
SearchStatus search_status_from_string(std::string_view s);

// Folds used inside every searcher.
inline constexpr std::size_t kSearchFolds = 3;

struct SearchReport {
  std::vector<PipelineRecord> pipelines;
  // Parallel to `pipelines`; set exactly when the record has_oof.
  std::vector<std::optional<PredictionMatrix>> oof;
  double elapsed_s = 0.0;
  SearchStatus status = SearchStatus::kComplete;
  std::string reason;
  std::size_t failed_candidates = 0;
  // Successive halving only: cohort size entering each rung, then the
  // number of survivors.
  std::vector<std::size_t> rung_sizes;
};

// Called once per fold with the rows the fold model trains on and the rows it
// predicts. Used to instrument leakage checks.
using FoldObserver = std::function<void(std::size_t fold, std::span<const std::size_t> train_rows,
                                        std::span<const std::size_t> predict_rows)>;

struct SearchControl {
  std::string searcher_id;
  Clock::time_point deadline = Clock::time_point::max();
  std::function<bool()> stop_requested;
  FoldObserver fold_observer;
  // Invoked after each evaluated candidate, before the next one starts.
  std::function<void(const PipelineRecord&, const PredictionMatrix* oof)> on_candidate;

  // Random search draws this many candidates.
  std::size_t random_candidates = 40;
  // Initial successive-halving cohort.
  std::size_t halving_cohort = 16;

  bool expired() const;
};

struct CvResult {
  double mean_score = 0.0;
  PredictionMatrix oof;
};

// Validation score in [0, 1], higher is better: accuracy, or exp(-logloss).
double validation_score(Metric metric, const PredictionMatrix& probs, std::span<const std::size_t> truth);

// Fits on every fold complement and predicts the fold. Throws TaskError when
// any fold fails to fit.
CvResult cv_evaluate(const CandidatePipeline& pipeline, const Dataset& data, const FoldAssignment& folds,
                     Metric metric = Metric::kAccuracy, const FoldObserver& observer = {});

// The fixed enumeration order of grid_template_search.
std::vector<CandidatePipeline> grid_template_candidates();

// Uniform draw from the primitive space.
CandidatePipeline sample_candidate(Rng& rng);

SearchReport grid_template_search(const Dataset& data, const TaskSpec& spec, const SearchControl& control);
SearchReport random_search(const Dataset& data, const TaskSpec& spec, const SearchControl& control);
// Scores a random cohort on growing training prefixes against a holdout and
// keeps the better half each rung. Eliminated candidates are reported with
// their last holdout score and no OOF; the survivor gets full CV.
SearchReport successive_halving_search(const Dataset& data, const TaskSpec& spec,
                                       const SearchControl& control);

SearchReport run_search_strategy(SearcherKind kind, const Dataset& data, const TaskSpec& spec,
                                 const SearchControl& control);

// Fits on every row and publishes the model in `store`. Returns artifact_ref.
std::string refit(const CandidatePipeline& pipeline, const Dataset& data, const ArtifactStore& store,
                  const std::string& pipeline_id);

// Refits the best-scoring records (at most `limit`) until `deadline`,
// updating their artifact_ref. Records that fail to refit keep an empty ref.
void refit_best(SearchReport& report, const Dataset& data, const ArtifactStore& store,
                Clock::time_point deadline, std::size_t limit,
                const std::function<bool()>& stop_requested = {});

inline std::string pipeline_id_for(const std::string& searcher_id, std::uint64_t index) {
  std::string n = std::to_string(index);
  if (n.size() < 4) n.insert(0, 4 - n.size(), '0');
  return searcher_id + "-" + n;
}

}  // namespace ens2
