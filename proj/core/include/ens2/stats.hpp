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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ens2/matrix.hpp"

namespace ens2 {

// Assignment of every row to one of k folds.
struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;

  std::vector<std::size_t> rows_in(std::size_t fold) const;
  std::vector<std::size_t> rows_not_in(std::size_t fold) const;
};

// Deterministic k-fold split. Stratified when labels are given: each class is
// shuffled and dealt round-robin, continuing where the previous class ended,
// so per-class and total fold sizes both differ by at most one.
FoldAssignment kfold(std::size_t n, std::size_t k, std::optional<std::span<const std::size_t>> labels,
                     std::uint64_t seed);

double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

inline constexpr double kLoglossEps = 1e-15;

double logloss(const PredictionMatrix& probs, std::span<const std::size_t> truth,
               double eps = kLoglossEps);

// Rank 1 is best; ties share the mean of the ranks they span.
std::vector<double> fractional_ranks(std::span<const double> values, bool higher_better);

// Accuracy of every (system, dataset, seed) cell; nullopt marks a failure.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::vector<std::string> systems, std::vector<std::string> datasets,
             std::vector<std::uint64_t> seeds);

  const std::vector<std::string>& systems() const noexcept { return systems_; }
  const std::vector<std::string>& datasets() const noexcept { return datasets_; }
  const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }

  void set(std::size_t system, std::size_t dataset, std::size_t seed, std::optional<double> acc);
  std::optional<double> get(std::size_t system, std::size_t dataset, std::size_t seed) const;

  std::size_t num_cells() const noexcept { return datasets_.size() * seeds_.size(); }

  // Long format: system,dataset,seed,accuracy,status (status ok|FAILED).
  std::string to_csv() const;
  static ScoreTable from_csv(std::string_view text);

 private:
  std::size_t index(std::size_t system, std::size_t dataset, std::size_t seed) const;

  std::vector<std::string> systems_;
  std::vector<std::string> datasets_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::optional<double>> scores_;
};

struct SystemSummary {
  std::string system;
  double avg_accuracy = 0.0;
  double avg_rank = 0.0;
  std::size_t first_place_count = 0;
  std::size_t scored_cells = 0;
};

// Per-system averages; failed entries are left out of the cell ranking and
// of the failing system's averages.
std::vector<SystemSummary> summarize(const ScoreTable& table);

struct WilcoxonResult {
  double statistic = 0.0;  // W+
  double p_two_sided = 1.0;
  bool reject = false;
  std::size_t n_effective = 0;
  bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 20;

// Two-sided Wilcoxon signed-rank test of x - y. Zero differences are
// dropped; exact null distribution up to kWilcoxonExactMaxN pairs, normal
// approximation with tie and continuity correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    double alpha = 0.05);

// Pearson r between systems over the cells where both succeeded. Entries are
// nullopt when fewer than two shared cells exist or a side has zero variance.
std::vector<std::vector<std::optional<double>>> pearson_correlation_matrix(const ScoreTable& table);

std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

}  // namespace ens2
