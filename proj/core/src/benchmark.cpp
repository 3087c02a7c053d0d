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

#include "ens2/benchmark.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"

namespace ens2 {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace

BenchmarkSystem parse_system_name(const std::string& name) {
  BenchmarkSystem s;
  s.name = name;
  if (name == "voting") {
    s.kind = SystemKind::kVoting;
  } else if (name == "stacking") {
    s.kind = SystemKind::kStacking;
  } else if (name.rfind("single:", 0) == 0) {
    s.kind = SystemKind::kSingle;
    s.searcher = searcher_kind_from_string(name.substr(7));
  } else {
    throw Error("unknown benchmark system '" + name + "'");
  }
  return s;
}

void BenchmarkConfig::validate() const {
  if (datasets.empty()) throw Error("benchmark needs at least one dataset");
  if (systems.empty()) throw Error("benchmark needs at least one system");
  if (seeds.empty()) throw Error("benchmark needs at least one seed");
  if (!(budget_s > 0.0)) throw Error("benchmark budget must be positive");
  if (k < 1) throw Error("benchmark k must be at least 1");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (d.name.empty() || d.train_path.empty() || d.test_path.empty() || d.target.empty()) {
      throw Error("benchmark dataset entries need name, train, test and target");
    }
    if (!names.insert(d.name).second) throw Error("duplicate benchmark dataset '" + d.name + "'");
  }
  names.clear();
  for (const auto& s : systems) {
    if (!names.insert(s.name).second) throw Error("duplicate benchmark system '" + s.name + "'");
    if (s.budget_s && !(*s.budget_s > 0.0)) throw Error("system budget must be positive");
  }
}

std::vector<WorkerSpec> workers_from_document(const ConfigDocument& doc) {
  const auto& entries = doc.array("worker");
  if (entries.empty()) return default_workers();
  std::vector<WorkerSpec> out;
  for (const auto& w : entries) {
    WorkerSpec spec;
    spec.kind = searcher_kind_from_string(w.get_string("kind").value_or("grid"));
    spec.searcher_id = w.get_string("id").value_or(std::string(to_string(spec.kind)));
    spec.command = w.get_strings("command").value_or(std::vector<std::string>{});
    out.push_back(std::move(spec));
  }
  return out;
}

BenchmarkConfig BenchmarkConfig::from_document(const ConfigDocument& doc, const fs::path& base_dir) {
  BenchmarkConfig c;
  static const ConfigTable kEmpty;
  const ConfigTable& b = doc.table("benchmark") ? *doc.table("benchmark") : kEmpty;
  if (auto v = b.get_double("budget_s")) c.budget_s = *v;
  if (auto v = b.get_double("grace_s")) c.grace_s = *v;
  if (auto v = b.get_int("k")) {
    if (*v < 1) throw Error("benchmark k must be at least 1");
    c.k = static_cast<std::size_t>(*v);
  }
  if (auto v = b.get_bool("retry")) c.retry_failed = *v;
  if (auto v = b.get_ints("seeds")) {
    c.seeds.clear();
    for (auto s : *v) {
      if (s < 0) throw Error("benchmark seeds must be non-negative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  for (const auto& d : doc.array("dataset")) {
    BenchmarkDataset ds;
    ds.name = d.get_string("name").value_or("");
    ds.train_path = resolve(base_dir, d.get_string("train").value_or(""));
    ds.test_path = resolve(base_dir, d.get_string("test").value_or(""));
    ds.target = d.get_string("target").value_or("");
    c.datasets.push_back(std::move(ds));
  }
  for (const auto& s : doc.array("system")) {
    BenchmarkSystem sys = parse_system_name(s.get_string("name").value_or(""));
    sys.budget_s = s.get_double("budget_s");
    c.systems.push_back(std::move(sys));
  }
  if (c.systems.empty()) {
    if (b.get_bool("singles").value_or(true)) {
      for (const auto& w : workers_from_document(doc)) {
        c.systems.push_back(parse_system_name("single:" + std::string(to_string(w.kind))));
      }
    }
    if (b.get_bool("voting").value_or(true)) c.systems.push_back(parse_system_name("voting"));
    if (b.get_bool("stacking").value_or(false)) c.systems.push_back(parse_system_name("stacking"));
  }
  c.workers = workers_from_document(doc);
  c.validate();
  return c;
}

BenchmarkConfig BenchmarkConfig::from_file(const std::string& path) {
  return from_document(read_config_file(path), fs::absolute(path).parent_path());
}

BenchmarkReport render_report(const ScoreTable& table, double alpha) {
  const auto& systems = table.systems();
  const auto summary = summarize(table);
  const std::size_t m = systems.size();
  BenchmarkReport r;

  r.summary_csv = "system,avg_accuracy,avg_rank,first_place_count,scored_cells\n";
  for (const auto& s : summary) {
    r.summary_csv += csv_escape(s.system) + "," + format_double(s.avg_accuracy) + "," + format_double(s.avg_rank) +
                     "," + std::to_string(s.first_place_count) + "," + std::to_string(s.scored_cells) + "\n";
  }

  // Paired samples over the cells where both systems succeeded.
  auto paired = [&](std::size_t a, std::size_t b, std::vector<double>& xa, std::vector<double>& xb) {
    xa.clear();
    xb.clear();
    for (std::size_t d = 0; d < table.datasets().size(); ++d) {
      for (std::size_t s = 0; s < table.seeds().size(); ++s) {
        auto va = table.get(a, d, s);
        auto vb = table.get(b, d, s);
        if (va && vb) {
          xa.push_back(*va);
          xb.push_back(*vb);
        }
      }
    }
  };

  std::vector<std::vector<std::optional<WilcoxonResult>>> wil(m, std::vector<std::optional<WilcoxonResult>>(m));
  r.wilcoxon_csv = "system_a,system_b,pairs,n_effective,statistic,p_value,reject\n";
  std::vector<double> xa, xb;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      paired(a, b, xa, xb);
      if (xa.empty()) continue;
      wil[a][b] = wilcoxon_signed_rank(xa, xb, alpha);
      const auto& w = *wil[a][b];
      r.wilcoxon_csv += csv_escape(systems[a]) + "," + csv_escape(systems[b]) + "," + std::to_string(xa.size()) +
                        "," + std::to_string(w.n_effective) + "," + format_double(w.statistic) + "," +
                        format_double(w.p_two_sided) + "," + (w.reject ? "true" : "false") + "\n";
    }
  }

  const auto corr = pearson_correlation_matrix(table);
  r.correlation_csv = "system";
  for (const auto& s : systems) r.correlation_csv += "," + csv_escape(s);
  r.correlation_csv += "\n";
  for (std::size_t a = 0; a < m; ++a) {
    r.correlation_csv += csv_escape(systems[a]);
    for (std::size_t b = 0; b < m; ++b) r.correlation_csv += "," + (corr[a][b] ? format_double(*corr[a][b]) : "");
    r.correlation_csv += "\n";
  }

  std::string md = "# Benchmark report\n\n";
  md += std::to_string(table.datasets().size()) + " datasets, " + std::to_string(table.seeds().size()) +
        " seeds, " + std::to_string(m) + " systems. Accuracy on the held-out test split.\n\n";
  md += "## Summary\n\n";
  md += "| System | Average Accuracy | Average Rank | # First Place | Scored Cells |\n";
  md += "|---|---:|---:|---:|---:|\n";
  for (const auto& s : summary) {
    md += "| " + s.system + " | " + fixed(s.avg_accuracy, 4) + " | " + fixed(s.avg_rank, 3) + " | " +
          std::to_string(s.first_place_count) + " | " + std::to_string(s.scored_cells) + " |\n";
  }

  md += "\n## Accuracy per dataset (mean over seeds)\n\n| Dataset |";
  for (const auto& s : systems) md += " " + s + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < m; ++i) md += "---:|";
  md += "\n";
  for (std::size_t d = 0; d < table.datasets().size(); ++d) {
    md += "| " + table.datasets()[d] + " |";
    for (std::size_t a = 0; a < m; ++a) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t s = 0; s < table.seeds().size(); ++s) {
        if (auto v = table.get(a, d, s)) {
          sum += *v;
          ++n;
        }
      }
      md += " " + (n ? fixed(sum / static_cast<double>(n), 4) : std::string("FAILED")) + " |";
    }
    md += "\n";
  }

  md += "\n## Wilcoxon signed-rank test (two-sided, alpha = " + format_double(alpha) + ")\n\n";
  md += "Entry (row, column) is the p-value of row versus column; `*` marks a rejected null hypothesis.\n\n|  |";
  for (const auto& s : systems) md += " " + s + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < m; ++i) md += "---:|";
  md += "\n";
  for (std::size_t a = 0; a < m; ++a) {
    md += "| " + systems[a] + " |";
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) {
        md += " - |";
      } else if (!wil[a][b]) {
        md += " n/a |";
      } else {
        md += " " + fixed(wil[a][b]->p_two_sided, 4) + (wil[a][b]->reject ? "*" : "") + " |";
      }
    }
    md += "\n";
  }

  md += "\n## Pearson correlation of accuracies\n\n|  |";
  for (const auto& s : systems) md += " " + s + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < m; ++i) md += "---:|";
  md += "\n";
  for (std::size_t a = 0; a < m; ++a) {
    md += "| " + systems[a] + " |";
    for (std::size_t b = 0; b < m; ++b) md += " " + (corr[a][b] ? fixed(*corr[a][b], 3) : std::string("n/a")) + " |";
    md += "\n";
  }

  std::string failures;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t d = 0; d < table.datasets().size(); ++d) {
      for (std::size_t s = 0; s < table.seeds().size(); ++s) {
        if (!table.get(a, d, s)) {
          failures += "- " + systems[a] + " on " + table.datasets()[d] + ", seed " +
                      std::to_string(table.seeds()[s]) + "\n";
        }
      }
    }
  }
  md += "\n## Failed cells\n\n" + (failures.empty() ? std::string("None.\n") : failures);
  r.markdown = std::move(md);
  return r;
}

void write_report(const ScoreTable& table, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const BenchmarkReport r = render_report(table);
  write_file_atomic(out_dir / "scores.csv", table.to_csv());
  write_file_atomic(out_dir / "summary.csv", r.summary_csv);
  write_file_atomic(out_dir / "wilcoxon.csv", r.wilcoxon_csv);
  write_file_atomic(out_dir / "correlation.csv", r.correlation_csv);
  write_file_atomic(out_dir / "report.md", r.markdown);
}

ScoreTable run_benchmark(const BenchmarkConfig& config, const fs::path& out_dir, const BenchmarkRunOptions& options) {
  config.validate();
  std::vector<std::string> system_names, dataset_names;
  for (const auto& s : config.systems) system_names.push_back(s.name);
  for (const auto& d : config.datasets) dataset_names.push_back(d.name);
  ScoreTable table(system_names, dataset_names, config.seeds);
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  for (std::size_t d = 0; d < config.datasets.size(); ++d) {
    const auto& ds = config.datasets[d];
    Dataset train, test_features;
    std::vector<std::string> truth;
    try {
      train = read_csv_file(ds.train_path, ds.target);
      const Dataset test = read_csv_file(ds.test_path, ds.target);
      for (auto y : *test.labels()) truth.push_back(test.label_vocab()[y]);
      test_features = read_csv_file(ds.test_path, std::nullopt);
    } catch (const std::exception& e) {
      log("dataset " + ds.name + " unreadable: " + e.what());
      continue;  // every cell of this dataset stays FAILED
    }

    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const std::uint64_t seed = config.seeds[s];
      // Ensemble systems with equal budgets share one search.
      std::map<double, std::optional<SearchOutcome>> ensemble_runs;

      for (std::size_t m = 0; m < config.systems.size(); ++m) {
        const auto& sys = config.systems[m];
        const double budget = sys.budget_s.value_or(config.budget_s);
        SearchPlan plan;
        plan.time_budget_s = budget;
        plan.grace_period_s = config.grace_s;
        plan.seed = seed;
        plan.k_top = config.k;
        plan.retry_failed = config.retry_failed;
        std::string run_name;
        if (sys.kind == SystemKind::kSingle) {
          plan.workers = {WorkerSpec{std::string(to_string(sys.searcher)), sys.searcher, {}}};
          for (const auto& w : config.workers) {
            if (w.kind == sys.searcher) plan.workers = {w};
          }
          run_name = "single-" + std::string(to_string(sys.searcher));
        } else {
          plan.workers = config.workers;
          run_name = "ensemble-" + format_double(budget);
        }
        const fs::path run_dir = out_dir / "runs" / ds.name / ("seed" + std::to_string(seed)) / run_name;

        try {
          std::optional<SearchOutcome> outcome;
          if (sys.kind == SystemKind::kSingle) {
            outcome = run_search(train, plan, run_dir, {options.worker_command, {}});
          } else {
            auto it = ensemble_runs.find(budget);
            if (it == ensemble_runs.end()) {
              std::optional<SearchOutcome> o;
              try {
                o = run_search(train, plan, run_dir, {options.worker_command, {}});
              } catch (const std::exception& e) {
                log(ds.name + " seed " + std::to_string(seed) + " ensemble search failed: " + e.what());
              }
              it = ensemble_runs.emplace(budget, std::move(o)).first;
            }
            if (!it->second) throw TaskError("ensemble search failed");
            outcome = it->second;
          }
          PredictOptions popts;
          popts.worker_command = options.worker_command;
          popts.mode = sys.kind == SystemKind::kStacking ? EnsembleMode::kStacking : EnsembleMode::kVoting;
          popts.k = sys.kind == SystemKind::kSingle ? 1 : config.k;
          popts.tag = sys.kind == SystemKind::kSingle ? std::string() : std::string(to_string(popts.mode));
          const PredictOutcome pred = run_predict(*outcome, test_features, popts);
          std::size_t correct = 0;
          for (std::size_t i = 0; i < truth.size(); ++i) correct += pred.labels[i] == truth[i] ? 1 : 0;
          const double acc = static_cast<double>(correct) / static_cast<double>(truth.size());
          table.set(m, d, s, acc);
          log(ds.name + " seed " + std::to_string(seed) + " " + sys.name + ": accuracy " + fixed(acc, 4));
        } catch (const std::exception& e) {
          table.set(m, d, s, std::nullopt);
          log(ds.name + " seed " + std::to_string(seed) + " " + sys.name + ": FAILED (" + e.what() + ")");
        }
      }
    }
  }
  write_report(table, out_dir);
  return table;
}

}  // namespace ens2
