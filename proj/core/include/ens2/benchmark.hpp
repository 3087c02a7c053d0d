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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ens2/config.hpp"
#include "ens2/orchestrator.hpp"
#include "ens2/stats.hpp"

namespace ens2 {

struct BenchmarkDataset {
  std::string name;
  std::string train_path;
  std::string test_path;
  std::string target;
};

enum class SystemKind { kSingle, kVoting, kStacking };

// "single:<searcher>", "voting" or "stacking".
struct BenchmarkSystem {
  std::string name;
  SystemKind kind = SystemKind::kVoting;
  SearcherKind searcher = SearcherKind::kGridTemplate;  // kSingle only
  // Overrides the benchmark budget, e.g. for equal-compute comparisons.
  std::optional<double> budget_s;
};

BenchmarkSystem parse_system_name(const std::string& name);

struct BenchmarkConfig {
  std::vector<BenchmarkDataset> datasets;
  std::vector<BenchmarkSystem> systems;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double budget_s = 10.0;
  std::optional<double> grace_s;
  std::size_t k = 3;
  bool retry_failed = true;
  // Roster of the ensemble systems.
  std::vector<WorkerSpec> workers = default_workers();

  void validate() const;  // throws Error

  // [benchmark] holds budget_s, grace_s, k, seeds, retry and the mode flags
  // singles/voting/stacking (used when no [[system]] entries are given);
  // [[dataset]] entries hold name, train, test and target; [[system]]
  // entries hold name and an optional budget_s; [[worker]] entries override
  // the roster. Relative paths resolve against base_dir.
  static BenchmarkConfig from_document(const ConfigDocument& doc, const std::filesystem::path& base_dir);
  static BenchmarkConfig from_file(const std::string& path);
};

// Worker roster from [[worker]] entries (id, kind, optional command), or
// default_workers() when there are none.
std::vector<WorkerSpec> workers_from_document(const ConfigDocument& doc);

struct BenchmarkReport {
  std::string summary_csv;
  std::string wilcoxon_csv;
  std::string correlation_csv;
  std::string markdown;
};

// Pure function of the table, so a report rebuilt from scores.csv is
// byte-identical.
BenchmarkReport render_report(const ScoreTable& table, double alpha = 0.05);

// Writes scores.csv, summary.csv, wilcoxon.csv, correlation.csv, report.md.
void write_report(const ScoreTable& table, const std::filesystem::path& out_dir);

struct BenchmarkRunOptions {
  std::vector<std::string> worker_command;
  std::function<void(const std::string&)> log;
};

// Runs every (dataset, seed, system) cell; a failing cell is recorded as
// FAILED and the run continues. Runs live under out_dir/runs/.
ScoreTable run_benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir,
                         const BenchmarkRunOptions& options);

}  // namespace ens2
