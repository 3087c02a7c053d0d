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

#include "ens2/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ens2/artifacts.hpp"
#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/process.hpp"
#include "json.hpp"
#include "json_codec.hpp"

namespace ens2 {

namespace fs = std::filesystem;
namespace proto = protocol;
using nlohmann::json;

namespace {

bool valid_searcher_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::vector<std::string> command_for(const WorkerSpec& w, const std::vector<std::string>& fallback) {
  const auto& cmd = w.command.empty() ? fallback : w.command;
  if (cmd.empty()) throw Error("no worker command configured for '" + w.searcher_id + "'");
  return cmd;
}

std::string tail_of_file(const fs::path& path, std::size_t max_bytes) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  std::string text = read_file(path);
  if (text.size() > max_bytes) text = text.substr(text.size() - max_bytes);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string describe_exit(const WorkerExit& e) {
  if (!e.spawn_error.empty()) return e.spawn_error;
  std::string s;
  if (e.killed) {
    s = "force-killed after the grace period";
  } else if (e.exit_code == proto::kExitBudgetKill) {
    s = "stopped at the budget";
  } else if (e.signal) {
    s = "died from signal " + std::to_string(*e.signal);
  } else {
    s = "exit " + std::to_string(e.exit_code);
  }
  if (e.last_envelope) {
    if (const auto* err = std::get_if<proto::ErrorInfo>(&e.last_envelope->payload)) s += ": " + err->message;
  }
  if (!e.protocol_errors.empty()) {
    s += " (" + std::to_string(e.protocol_errors.size()) + " malformed lines, first: " + e.protocol_errors[0] + ")";
  }
  return s;
}

json worker_outcome_json(const WorkerOutcome& w) {
  return {{"searcher_id", w.searcher_id},
          {"status", std::string(to_string(w.status))},
          {"exit_code", w.exit_code},
          {"retried", w.retried},
          {"pipelines", w.pipelines},
          {"elapsed_s", w.elapsed_s},
          {"max_silence_s", w.max_silence_s},
          {"diagnostics", w.diagnostics}};
}

void write_outcome(const SearchOutcome& o) {
  json workers = json::array();
  for (const auto& w : o.workers) workers.push_back(worker_outcome_json(w));
  json j = {{"run_id", o.run_id},
            {"target", o.target},
            {"succeeded", o.succeeded()},
            {"pipelines", o.merged.size()},
            {"workers", workers}};
  write_file_atomic(o.run_dir / "outcome.json", j.dump(2) + "\n");
}

proto::SearchRequest search_request(const SearchPlan& plan, const WorkerSpec& w, const std::string& target,
                                    const fs::path& train_csv, const fs::path& worker_dir) {
  proto::SearchRequest r;
  r.dataset_path = train_csv.string();
  r.target = target;
  r.metric = plan.metric;
  r.time_budget_s = plan.time_budget_s;
  r.refit_fraction = plan.refit_fraction;
  r.seed = plan.seed;
  r.artifact_dir = worker_dir.string();
  r.searcher = w.kind;
  r.searcher_id = w.searcher_id;
  return r;
}

}  // namespace

void SearchPlan::validate() const {
  if (workers.empty()) throw Error("search plan has no workers");
  std::set<std::string> ids;
  for (const auto& w : workers) {
    if (!valid_searcher_id(w.searcher_id)) throw Error("invalid searcher id '" + w.searcher_id + "'");
    if (!ids.insert(w.searcher_id).second) throw Error("duplicate searcher id '" + w.searcher_id + "'");
  }
  if (!(time_budget_s > 0.0) || !std::isfinite(time_budget_s)) throw Error("time budget must be positive");
  if (grace_period_s && !(*grace_period_s >= 0.0)) throw Error("grace period must be >= 0");
  if (!(refit_fraction >= 0.0 && refit_fraction < 1.0)) throw Error("refit fraction must lie in [0, 1)");
  if (k_top < 1) throw Error("k must be at least 1");
}

double SearchPlan::grace_s() const {
  return grace_period_s ? *grace_period_s : std::max(5.0, 0.1 * time_budget_s);
}

std::vector<WorkerSpec> default_workers() {
  std::vector<WorkerSpec> out;
  for (auto kind : {SearcherKind::kGridTemplate, SearcherKind::kRandom, SearcherKind::kSuccessiveHalving}) {
    out.push_back({std::string(to_string(kind)), kind, {}});
  }
  return out;
}

std::string plan_to_json(const SearchPlan& plan) {
  json workers = json::array();
  for (const auto& w : plan.workers) {
    workers.push_back({{"searcher_id", w.searcher_id}, {"kind", std::string(to_string(w.kind))},
                       {"command", w.command}});
  }
  json j = {{"workers", workers},
            {"metric", std::string(to_string(plan.metric))},
            {"time_budget_s", plan.time_budget_s},
            {"grace_period_s", plan.grace_period_s ? json(*plan.grace_period_s) : json(nullptr)},
            {"refit_fraction", plan.refit_fraction},
            {"seed", plan.seed},
            {"k_top", plan.k_top},
            {"retry_failed", plan.retry_failed}};
  return j.dump(2) + "\n";
}

SearchPlan plan_from_json(std::string_view text) {
  SearchPlan p;
  try {
    const json j = json::parse(text);
    for (const auto& w : j.at("workers")) {
      p.workers.push_back({w.at("searcher_id").get<std::string>(),
                           searcher_kind_from_string(w.at("kind").get<std::string>()),
                           w.value("command", std::vector<std::string>{})});
    }
    p.metric = metric_from_string(j.at("metric").get<std::string>());
    p.time_budget_s = j.at("time_budget_s").get<double>();
    if (!j.at("grace_period_s").is_null()) p.grace_period_s = j.at("grace_period_s").get<double>();
    p.refit_fraction = j.at("refit_fraction").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.k_top = j.at("k_top").get<std::size_t>();
    p.retry_failed = j.at("retry_failed").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
  p.validate();
  return p;
}

std::string_view to_string(WorkerStatus status) {
  switch (status) {
    case WorkerStatus::kComplete: return "complete";
    case WorkerStatus::kRecoveredPartial: return "recovered_partial";
    case WorkerStatus::kFailed: return "failed";
  }
  return "?";
}

WorkerStatus worker_status_from_string(std::string_view s) {
  if (s == "complete") return WorkerStatus::kComplete;
  if (s == "recovered_partial") return WorkerStatus::kRecoveredPartial;
  if (s == "failed") return WorkerStatus::kFailed;
  throw Error("unknown worker status '" + std::string(s) + "'");
}

std::string_view to_string(EnsembleMode mode) {
  return mode == EnsembleMode::kVoting ? "voting" : "stacking";
}

EnsembleMode ensemble_mode_from_string(std::string_view s) {
  if (s == "voting") return EnsembleMode::kVoting;
  if (s == "stacking") return EnsembleMode::kStacking;
  throw Error("unknown ensemble mode '" + std::string(s) + "'");
}

std::vector<PipelineRecord> rank_pipelines(std::vector<PipelineRecord> records) {
  if (records.empty()) throw Error("cannot rank an empty pipeline list");
  for (const auto& r : records) {
    if (!std::isfinite(r.validation_score)) throw Error("pipeline " + r.id + " has a non-finite score");
  }
  std::sort(records.begin(), records.end(), [](const PipelineRecord& a, const PipelineRecord& b) {
    if (a.validation_score != b.validation_score) return a.validation_score > b.validation_score;
    if (a.discovered_at != b.discovered_at) return a.discovered_at < b.discovered_at;
    if (a.searcher_id != b.searcher_id) return a.searcher_id < b.searcher_id;
    return a.id < b.id;
  });
  return records;
}

std::vector<PipelineRecord> select_top_k(const std::vector<PipelineRecord>& ranked, std::size_t k) {
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()))};
}

std::vector<PipelineRecord> select_best_per_searcher(const std::vector<PipelineRecord>& ranked,
                                                     std::vector<std::string>* warnings) {
  std::vector<PipelineRecord> out;
  std::set<std::string> seen;
  for (const auto& r : ranked) {
    if (!seen.insert(r.searcher_id).second) continue;
    if (!r.has_oof) {
      if (warnings) {
        warnings->push_back("searcher " + r.searcher_id + " excluded from stacking: best pipeline " + r.id +
                            " has no out-of-fold predictions");
      }
      continue;
    }
    out.push_back(r);
  }
  if (out.empty()) throw TaskError("stacker has no base learners");
  return out;
}

SearchOutcome SearchOutcome::load(const fs::path& run_dir) {
  const fs::path outcome_path = run_dir / "outcome.json";
  const fs::path merged_path = run_dir / "merged.ndjson";
  if (!fs::exists(outcome_path) || !fs::exists(merged_path) || !fs::exists(run_dir / "plan.json")) {
    throw Error("missing run artifacts in " + run_dir.string());
  }
  SearchOutcome o;
  o.run_dir = run_dir;
  o.plan = plan_from_json(read_file(run_dir / "plan.json"));
  try {
    const json j = json::parse(read_file(outcome_path));
    o.run_id = j.at("run_id").get<std::string>();
    o.target = j.at("target").get<std::string>();
    for (const auto& w : j.at("workers")) {
      WorkerOutcome wo;
      wo.searcher_id = w.at("searcher_id").get<std::string>();
      wo.status = worker_status_from_string(w.at("status").get<std::string>());
      wo.exit_code = w.at("exit_code").get<int>();
      wo.retried = w.at("retried").get<bool>();
      wo.pipelines = w.at("pipelines").get<std::size_t>();
      wo.elapsed_s = w.at("elapsed_s").get<double>();
      wo.max_silence_s = w.at("max_silence_s").get<double>();
      wo.diagnostics = w.at("diagnostics").get<std::string>();
      o.workers.push_back(std::move(wo));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("outcome.json: ") + e.what());
  }
  const std::string text = read_file(merged_path);
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    if (nl > start) o.merged.push_back(record_from_json(std::string_view(text).substr(start, nl - start)));
    start = nl + 1;
  }
  return o;
}

SearchOutcome run_search(const Dataset& train, const SearchPlan& plan, const fs::path& run_dir,
                         const OrchestratorOptions& options) {
  plan.validate();
  if (!train.has_labels() || !train.schema().target) throw Error("run_search needs a labeled dataset");

  SearchOutcome outcome;
  outcome.run_dir = run_dir;
  outcome.run_id = run_dir.filename().string();
  if (outcome.run_id.empty()) outcome.run_id = run_dir.parent_path().filename().string();
  outcome.plan = plan;
  outcome.target = *train.schema().target;

  fs::create_directories(run_dir / "workers");
  write_file_atomic(run_dir / "plan.json", plan_to_json(plan));
  const fs::path train_csv = fs::absolute(run_dir / "train.csv");
  write_file_atomic(train_csv, to_csv(train));
  write_manifest(train, (run_dir / "train.manifest.json").string());

  outcome.workers.resize(plan.workers.size());
  std::vector<std::vector<PipelineRecord>> recovered(plan.workers.size());

  auto run_batch = [&](const std::vector<std::size_t>& which) {
    std::vector<WorkerJob> jobs;
    for (std::size_t i : which) {
      const WorkerSpec& w = plan.workers[i];
      const fs::path dir = fs::absolute(run_dir / "workers" / w.searcher_id);
      fs::remove_all(dir);
      fs::create_directories(dir);
      proto::Envelope request{proto::kVersion, outcome.run_id,
                              search_request(plan, w, outcome.target, train_csv, dir)};
      WorkerJob job;
      job.name = w.searcher_id;
      job.argv = command_for(w, options.worker_command);
      job.request_line = proto::encode(request);
      job.log_path = dir / "worker.log";
      job.budget_s = plan.time_budget_s;
      job.grace_s = plan.grace_s();
      if (options.on_envelope) {
        job.on_envelope = [&options, sid = w.searcher_id](const proto::Envelope& e) { options.on_envelope(sid, e); };
      }
      jobs.push_back(std::move(job));
    }
    const auto exits = supervise(std::move(jobs));
    for (std::size_t n = 0; n < which.size(); ++n) {
      const std::size_t i = which[n];
      const WorkerSpec& w = plan.workers[i];
      const WorkerExit& e = exits[n];
      const fs::path dir = run_dir / "workers" / w.searcher_id;
      std::vector<PipelineRecord> records;
      try {
        records = ArtifactStore(dir).load_records();
      } catch (const std::exception&) {
        records.clear();
      }
      // Only this worker's own pipelines are trusted.
      std::erase_if(records, [&](const PipelineRecord& r) { return r.searcher_id != w.searcher_id; });
      for (auto& r : records) {
        if (!r.artifact_ref.empty()) r.artifact_ref = "workers/" + w.searcher_id + "/" + r.artifact_ref;
      }
      WorkerOutcome& wo = outcome.workers[i];
      const bool retried = wo.searcher_id == w.searcher_id;
      wo = WorkerOutcome{};
      wo.searcher_id = w.searcher_id;
      wo.retried = retried;
      wo.exit_code = e.exit_code;
      wo.elapsed_s = e.elapsed_s;
      wo.max_silence_s = e.max_silence_s;
      wo.pipelines = records.size();
      const bool finished = e.exit_code == proto::kExitSuccess && e.last_envelope &&
                            e.last_envelope->kind() == proto::Kind::kSearchResult;
      if (finished && !records.empty()) {
        wo.status = WorkerStatus::kComplete;
        wo.diagnostics = "ok";
      } else {
        wo.status = records.empty() ? WorkerStatus::kFailed : WorkerStatus::kRecoveredPartial;
        wo.diagnostics = describe_exit(e);
        const std::string log = tail_of_file(dir / "worker.log", 400);
        if (!log.empty()) wo.diagnostics += "\n" + log;
      }
      recovered[i] = std::move(records);
    }
  };

  std::vector<std::size_t> all(plan.workers.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  run_batch(all);
  if (plan.retry_failed) {
    std::vector<std::size_t> failed;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (outcome.workers[i].status == WorkerStatus::kFailed) failed.push_back(i);
    }
    if (!failed.empty()) run_batch(failed);
  }

  std::vector<PipelineRecord> merged;
  for (auto& r : recovered) merged.insert(merged.end(), r.begin(), r.end());
  if (!merged.empty()) outcome.merged = rank_pipelines(std::move(merged));

  std::string lines;
  for (const auto& r : outcome.merged) lines += record_to_json(r) + "\n";
  write_file_atomic(run_dir / "merged.ndjson", lines);
  write_outcome(outcome);

  if (!outcome.succeeded()) {
    std::string why;
    for (const auto& w : outcome.workers) {
      why += "\n  " + w.searcher_id + ": " + w.diagnostics.substr(0, w.diagnostics.find('\n'));
    }
    throw TaskError("meta-search failed: every worker failed" + why);
  }
  return outcome;
}

namespace {

struct PipelinePrediction {
  std::vector<std::string> labels;
  PredictionMatrix probabilities;
};

// Reads row_index,predicted_label,p_<class>... written by a predict worker.
PipelinePrediction read_prediction_file(const fs::path& path, std::size_t rows,
                                        const std::vector<std::string>& vocab) {
  const auto records = parse_csv_records(read_file(path));
  if (records.empty() || records[0].size() != vocab.size() + 2 || records[0][0] != "row_index" ||
      records[0][1] != "predicted_label") {
    throw ParseError("prediction file " + path.string() + " has an unexpected header");
  }
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    if (records[0][c + 2] != "p_" + vocab[c]) throw ParseError("prediction file class columns do not match");
  }
  if (records.size() != rows + 1) throw ParseError("prediction file " + path.string() + " has the wrong row count");
  PipelinePrediction out;
  out.labels.resize(rows);
  out.probabilities = PredictionMatrix(rows, vocab.size());
  std::vector<bool> seen(rows, false);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != vocab.size() + 2) throw ParseError("prediction file: ragged row");
    std::size_t row = 0;
    try {
      row = std::stoull(rec[0]);
      if (row >= rows || seen[row]) throw ParseError("");
      for (std::size_t c = 0; c < vocab.size(); ++c) out.probabilities(row, c) = std::stod(rec[c + 2]);
    } catch (const std::exception&) {
      throw ParseError("prediction file: bad row " + std::to_string(i));
    }
    seen[row] = true;
    out.labels[row] = rec[1];
  }
  return out;
}

struct PredictJobResult {
  bool ok = false;
  PipelinePrediction prediction;
  std::string error;
};

std::vector<PredictJobResult> predict_with(const SearchOutcome& outcome, const std::vector<PipelineRecord>& pipelines,
                                           const fs::path& test_csv, const fs::path& out_dir,
                                           const std::vector<std::string>& command, std::size_t rows,
                                           const std::vector<std::string>& vocab) {
  std::vector<WorkerJob> jobs;
  std::vector<PredictJobResult> results(pipelines.size());
  for (const auto& p : pipelines) {
    proto::PredictRequest req;
    req.pipeline_id = p.id;
    req.artifact_dir = fs::absolute(outcome.run_dir / "workers" / p.searcher_id).string();
    req.test_dataset_path = test_csv.string();
    req.output_path = fs::absolute(out_dir / (p.id + ".csv")).string();
    WorkerJob job;
    job.name = p.id;
    job.argv = command;
    job.request_line = proto::encode(proto::Envelope{proto::kVersion, outcome.run_id, req});
    job.log_path = out_dir / (p.id + ".log");
    job.budget_s = std::max(60.0, outcome.plan.time_budget_s);
    job.grace_s = outcome.plan.grace_s();
    jobs.push_back(std::move(job));
  }
  const auto exits = supervise(std::move(jobs));
  for (std::size_t i = 0; i < pipelines.size(); ++i) {
    const auto& e = exits[i];
    const bool finished = e.exit_code == proto::kExitSuccess && e.last_envelope &&
                          e.last_envelope->kind() == proto::Kind::kPredictResult;
    if (!finished) {
      results[i].error = describe_exit(e);
      continue;
    }
    try {
      results[i].prediction = read_prediction_file(out_dir / (pipelines[i].id + ".csv"), rows, vocab);
      results[i].ok = true;
    } catch (const std::exception& ex) {
      results[i].error = ex.what();
    }
  }
  return results;
}

std::size_t label_index(const std::vector<std::string>& vocab, const std::string& name) {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), name);
  if (it == vocab.end() || *it != name) throw ParseError("predicted label '" + name + "' is not a training label");
  return static_cast<std::size_t>(it - vocab.begin());
}

}  // namespace

std::string final_predictions_csv(const std::vector<std::string>& labels) {
  std::string out = "row_index,predicted_label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + csv_escape(labels[i]) + "\n";
  return out;
}

PredictOutcome run_predict(const SearchOutcome& outcome, const Dataset& test, const PredictOptions& options) {
  if (!outcome.succeeded()) throw TaskError("the search produced no pipelines");
  if (options.k < 1) throw Error("k must be at least 1");
  const std::vector<std::string> command = options.worker_command;
  if (command.empty()) throw Error("no worker command configured");

  const Dataset train = read_csv_file((outcome.run_dir / "train.csv").string(), outcome.target);
  const Dataset aligned = align_test(train, test);  // surfaces missing columns early
  const auto& vocab = train.label_vocab();
  const std::size_t rows = aligned.num_rows();

  const fs::path out_dir = options.tag.empty() ? outcome.run_dir / "predictions"
                                               : outcome.run_dir / "predictions" / options.tag;
  fs::create_directories(out_dir);
  const fs::path test_csv = fs::absolute(out_dir / "test.csv");
  write_file_atomic(test_csv, to_csv(test));

  PredictOutcome result;
  std::vector<std::string> final_labels;

  if (options.mode == EnsembleMode::kVoting) {
    std::vector<std::pair<int, PipelineRecord>> candidates;  // (cv_rank, record)
    for (std::size_t i = 0; i < outcome.merged.size(); ++i) {
      if (!outcome.merged[i].artifact_ref.empty()) {
        candidates.emplace_back(static_cast<int>(i + 1), outcome.merged[i]);
      }
    }
    if (options.k > candidates.size()) {
      result.warnings.push_back("k=" + std::to_string(options.k) + " exceeds the " +
                                std::to_string(candidates.size()) + " refit pipelines; using all of them");
    }
    std::vector<std::pair<int, PipelinePrediction>> members;
    std::size_t next = 0;
    while (members.size() < options.k && next < candidates.size()) {
      const std::size_t want = std::min(options.k - members.size(), candidates.size() - next);
      std::vector<PipelineRecord> batch;
      std::vector<int> ranks;
      for (std::size_t i = 0; i < want; ++i, ++next) {
        batch.push_back(candidates[next].second);
        ranks.push_back(candidates[next].first);
      }
      auto got = predict_with(outcome, batch, test_csv, out_dir, command, rows, vocab);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (got[i].ok) {
          members.emplace_back(ranks[i], std::move(got[i].prediction));
          result.used_pipelines.push_back(batch[i].id);
        } else {
          result.warnings.push_back("pipeline " + batch[i].id + " failed to predict (" + got[i].error +
                                    "); promoting the next-ranked pipeline");
        }
      }
    }
    if (members.empty()) throw TaskError("no pipeline produced predictions");
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<LabelVector> preds;
    std::vector<int> ranks;
    VoteCommittee committee;
    committee.k = options.k;
    std::map<int, std::string> id_by_rank;
    for (std::size_t i = 0; i < outcome.merged.size(); ++i) id_by_rank[static_cast<int>(i + 1)] = outcome.merged[i].id;
    for (auto& [rank, pred] : members) {
      LabelVector lv(rows);
      for (std::size_t r = 0; r < rows; ++r) lv[r] = label_index(vocab, pred.labels[r]);
      preds.push_back(std::move(lv));
      ranks.push_back(rank);
      committee.members.push_back({id_by_rank[rank], rank});
    }
    result.used_pipelines.clear();
    for (const auto& m : committee.members) result.used_pipelines.push_back(m.pipeline_id);
    write_file_atomic(out_dir / "committee.txt", committee.to_text());
    const LabelVector voted = majority_vote(preds, ranks);
    for (auto y : voted) final_labels.push_back(vocab[y]);
  } else {
    const auto roster = select_best_per_searcher(outcome.merged, &result.warnings);
    auto got = predict_with(outcome, roster, test_csv, out_dir, command, rows, vocab);
    std::vector<PredictionMatrix> oof;
    std::vector<PredictionMatrix> test_probs;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < roster.size(); ++i) {
      if (!got[i].ok) {
        result.warnings.push_back("pipeline " + roster[i].id + " failed to predict (" + got[i].error +
                                  "); dropped from the stacker");
        continue;
      }
      std::vector<std::string> oof_vocab;
      const fs::path oof_path = outcome.run_dir / "workers" / roster[i].searcher_id / "oof" / (roster[i].id + ".csv");
      PredictionMatrix m;
      try {
        m = probabilities_from_csv(read_file(oof_path), &oof_vocab, train.num_rows());
      } catch (const std::exception& ex) {
        result.warnings.push_back("pipeline " + roster[i].id + " has unusable OOF predictions (" + ex.what() +
                                  "); dropped from the stacker");
        continue;
      }
      if (oof_vocab != vocab) {
        result.warnings.push_back("pipeline " + roster[i].id + " OOF classes differ from the training labels; dropped");
        continue;
      }
      oof.push_back(std::move(m));
      test_probs.push_back(std::move(got[i].prediction.probabilities));
      ids.push_back(roster[i].id);
    }
    if (oof.empty()) throw TaskError("no pipeline produced predictions");
    const OofDesign design = assemble_oof_design(oof, *train.labels(), vocab.size());
    StackerOptions sopts = options.stacker;
    sopts.seed = outcome.plan.seed;
    const StackerModel model = train_stacker(design, sopts, ids, vocab);
    write_file_atomic(out_dir / "stacker.json", model.serialize());
    const StackerPrediction sp = stacker_predict(model, test_probs);
    for (auto y : sp.labels) final_labels.push_back(vocab[y]);
    result.used_pipelines = ids;
  }

  result.labels = std::move(final_labels);
  result.final_csv = out_dir / "final.csv";
  write_file_atomic(result.final_csv, final_predictions_csv(result.labels));
  return result;
}

}  // namespace ens2
