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

#include "service.hpp"

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <map>
#include <mutex>
#include <semaphore>
#include <set>
#include <thread>

#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ens2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Listed in lifecycle order; `failed` is reachable from every phase.
enum class Phase { kQueued, kSearching, kSearchComplete, kPredicting, kDone, kFailed };

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kQueued: return "queued";
    case Phase::kSearching: return "searching";
    case Phase::kSearchComplete: return "search_complete";
    case Phase::kPredicting: return "predicting";
    case Phase::kDone: return "done";
    case Phase::kFailed: return "failed";
  }
  return "?";
}

constexpr std::size_t kLeaderboardSize = 20;

struct WorkerView {
  std::string status = "pending";
  std::size_t pipelines = 0;
  std::string diagnostics;
};

struct RunState {
  std::string id;
  std::string dataset_id;
  std::string target;
  Phase phase = Phase::kQueued;
  std::string started_at;
  double budget_s = 0.0;
  std::size_t k = 3;
  EnsembleMode mode = EnsembleMode::kVoting;
  std::uint64_t seed = 0;
  std::vector<std::string> worker_order;
  std::map<std::string, WorkerView> workers;
  std::vector<PipelineRecord> leaderboard;
  std::vector<PipelineRecord> discovered;
  std::optional<SearchOutcome> outcome;
  std::string error;
};

struct PredictionState {
  std::string id;
  std::string run_id;
  std::string status = "queued";  // queued, running, done, failed
  EnsembleMode mode = EnsembleMode::kVoting;
  std::size_t k = 3;
  std::size_t rows = 0;
  std::vector<std::string> used_pipelines;
  std::vector<std::string> warnings;
  std::string error;
  fs::path file;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string numbered(const char* prefix, std::uint64_t n) {
  std::string s = std::to_string(n);
  if (s.size() < 4) s.insert(0, 4 - s.size(), '0');
  return std::string(prefix) + s;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

json record_summary(const PipelineRecord& r) {
  return {{"pipeline_id", r.id},
          {"searcher_id", r.searcher_id},
          {"validation_score", r.validation_score},
          {"has_oof", r.has_oof},
          {"refit", !r.artifact_ref.empty()}};
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig c) : config(std::move(c)), slots(static_cast<std::ptrdiff_t>(std::max<std::size_t>(config.slots, 1))) {
    if (config.data_dir.empty()) throw Error("service needs a data directory");
    if (config.worker_command.empty()) throw Error("service needs a worker command");
    fs::create_directories(config.data_dir / "datasets");
    fs::create_directories(config.data_dir / "runs");
    fs::create_directories(config.data_dir / "predictions");
    // Continue numbering after whatever an earlier instance left behind.
    for (const auto& e : fs::directory_iterator(config.data_dir / "datasets")) {
      if (e.path().extension() == ".csv") ++dataset_counter;
    }
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(config.data_dir / "runs")) ++run_counter;
    for (const auto& e : fs::directory_iterator(config.data_dir / "predictions")) {
      if (e.path().extension() == ".csv") ++prediction_counter;
    }
    routes();
  }

  ServiceConfig config;
  httplib::Server server;
  std::counting_semaphore<1024> slots;

  std::mutex mu;
  std::condition_variable idle_cv;
  std::size_t active_jobs = 0;
  std::vector<std::thread> threads;
  std::uint64_t dataset_counter = 0;
  std::uint64_t run_counter = 0;
  std::uint64_t prediction_counter = 0;
  std::set<std::string> datasets;
  std::map<std::string, RunState> runs;
  std::map<std::string, PredictionState> predictions;

  fs::path dataset_path(const std::string& id) const { return config.data_dir / "datasets" / (id + ".csv"); }

  bool dataset_exists(const std::string& id) {
    if (id.find('/') != std::string::npos || id.find("..") != std::string::npos) return false;
    std::lock_guard lock(mu);
    return datasets.contains(id) || fs::exists(dataset_path(id));
  }

  // Caller holds mu.
  void advance(RunState& run, Phase next) {
    if (run.phase == Phase::kFailed) return;
    if (next == Phase::kFailed || static_cast<int>(next) > static_cast<int>(run.phase)) run.phase = next;
  }

  void spawn_job(std::function<void()> fn) {
    std::lock_guard lock(mu);
    ++active_jobs;
    threads.emplace_back([this, fn = std::move(fn)] {
      slots.acquire();
      try {
        fn();
      } catch (...) {
      }
      slots.release();
      std::lock_guard inner(mu);
      --active_jobs;
      idle_cv.notify_all();
    });
  }

  json run_json(const RunState& r) const {
    json workers = json::array();
    for (const auto& id : r.worker_order) {
      const auto& w = r.workers.at(id);
      workers.push_back({{"searcher_id", id}, {"status", w.status}, {"pipelines", w.pipelines},
                         {"diagnostics", w.diagnostics}});
    }
    json board = json::array();
    for (const auto& rec : r.leaderboard) board.push_back(record_summary(rec));
    json j = {{"run_id", r.id},
              {"dataset_id", r.dataset_id},
              {"target", r.target},
              {"phase", phase_name(r.phase)},
              {"started_at", r.started_at},
              {"budget_s", r.budget_s},
              {"k", r.k},
              {"mode", std::string(to_string(r.mode))},
              {"seed", r.seed},
              {"workers", workers},
              {"leaderboard", board}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
  }

  json prediction_json(const PredictionState& p) const {
    json j = {{"prediction_id", p.id},
              {"run_id", p.run_id},
              {"status", p.status},
              {"mode", std::string(to_string(p.mode))},
              {"k", p.k},
              {"rows", p.rows},
              {"used_pipelines", p.used_pipelines},
              {"warnings", p.warnings}};
    if (!p.error.empty()) j["error"] = p.error;
    return j;
  }

  void upload_dataset(const httplib::Request& req, httplib::Response& res) {
    std::string content;
    if (req.is_multipart_form_data()) {
      if (req.files.empty()) return reply_error(res, 422, "multipart upload has no file part");
      content = req.files.count("file") ? req.get_file_value("file").content : req.files.begin()->second.content;
    } else {
      content = req.body;
    }
    Dataset parsed;
    try {
      parsed = parse_csv(content, std::nullopt);
    } catch (const std::exception& e) {
      return reply_error(res, 422, e.what());
    }
    std::string id;
    {
      std::lock_guard lock(mu);
      id = numbered("ds-", ++dataset_counter);
      datasets.insert(id);
    }
    write_file_atomic(dataset_path(id), content);
    json cols = json::array();
    for (const auto& c : parsed.schema().columns) {
      cols.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
    }
    reply(res, 201, {{"dataset_id", id}, {"rows", parsed.num_rows()}, {"columns", cols}});
  }

  void create_run(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return reply_error(res, 422, std::string("invalid JSON body: ") + e.what());
    }
    if (!body.is_object()) return reply_error(res, 422, "request body must be an object");
    SearchPlan plan;
    std::string dataset_id, target;
    EnsembleMode mode = EnsembleMode::kVoting;
    std::optional<std::uint64_t> seed;
    try {
      dataset_id = body.at("dataset_id").get<std::string>();
      target = body.at("target").get<std::string>();
      plan.time_budget_s = body.at("budget_s").get<double>();
      plan.k_top = body.value("k", std::size_t{3});
      mode = ensemble_mode_from_string(body.value("mode", std::string("voting")));
      if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
      if (body.contains("workers")) {
        for (const auto& name : body.at("workers").get<std::vector<std::string>>()) {
          bool found = false;
          for (const auto& w : config.workers) {
            if (w.searcher_id == name) {
              plan.workers.push_back(w);
              found = true;
            }
          }
          if (!found) throw Error("unknown worker '" + name + "'");
        }
      } else {
        plan.workers = config.workers;
      }
      plan.grace_period_s = config.grace_s;
    } catch (const json::exception& e) {
      return reply_error(res, 422, std::string("invalid run request: ") + e.what());
    } catch (const Error& e) {
      return reply_error(res, 422, e.what());
    }
    if (!dataset_exists(dataset_id)) return reply_error(res, 404, "unknown dataset " + dataset_id);

    Dataset train;
    try {
      plan.validate();
      train = read_csv_file(dataset_path(dataset_id).string(), target);
    } catch (const Error& e) {
      return reply_error(res, 422, e.what());
    }

    std::string run_id;
    {
      std::lock_guard lock(mu);
      const std::uint64_t n = ++run_counter;
      run_id = numbered("run-", n);
      plan.seed = seed ? *seed : derive_seed(config.seed, n);
      RunState run;
      run.id = run_id;
      run.dataset_id = dataset_id;
      run.target = target;
      run.started_at = utc_now();
      run.budget_s = plan.time_budget_s;
      run.k = plan.k_top;
      run.mode = mode;
      run.seed = plan.seed;
      for (const auto& w : plan.workers) {
        run.worker_order.push_back(w.searcher_id);
        run.workers[w.searcher_id] = WorkerView{};
      }
      runs[run_id] = std::move(run);
    }
    spawn_job([this, run_id, plan, train = std::move(train)] { execute_search(run_id, plan, train); });
    reply(res, 202, {{"run_id", run_id}, {"phase", "queued"}});
  }

  void execute_search(const std::string& run_id, const SearchPlan& plan, const Dataset& train) {
    {
      std::lock_guard lock(mu);
      auto& run = runs.at(run_id);
      advance(run, Phase::kSearching);
      for (auto& [id, w] : run.workers) w.status = "running";
    }
    OrchestratorOptions opts;
    opts.worker_command = config.worker_command;
    opts.on_envelope = [this, run_id](const std::string& sid, const protocol::Envelope& e) {
      const auto* p = std::get_if<protocol::SearchProgress>(&e.payload);
      if (!p) return;
      std::lock_guard lock(mu);
      auto& run = runs.at(run_id);
      run.discovered.push_back(p->record);
      run.workers[sid].pipelines += 1;
      auto ranked = rank_pipelines(run.discovered);
      if (ranked.size() > kLeaderboardSize) ranked.resize(kLeaderboardSize);
      run.leaderboard = std::move(ranked);
    };
    const fs::path run_dir = config.data_dir / "runs" / run_id;
    std::optional<SearchOutcome> outcome;
    std::string error;
    try {
      outcome = run_search(train, plan, run_dir, opts);
    } catch (const std::exception& e) {
      error = e.what();
      try {
        outcome = SearchOutcome::load(run_dir);
      } catch (const std::exception&) {
      }
    }
    std::lock_guard lock(mu);
    auto& run = runs.at(run_id);
    if (outcome) {
      for (const auto& w : outcome->workers) {
        auto& view = run.workers[w.searcher_id];
        view.status = std::string(to_string(w.status));
        view.pipelines = w.pipelines;
        view.diagnostics = w.diagnostics;
      }
      run.leaderboard.assign(outcome->merged.begin(),
                             outcome->merged.begin() +
                                 static_cast<std::ptrdiff_t>(std::min(kLeaderboardSize, outcome->merged.size())));
    }
    if (error.empty() && outcome && outcome->succeeded()) {
      run.outcome = std::move(outcome);
      advance(run, Phase::kSearchComplete);
    } else {
      run.error = error.empty() ? "meta-search failed" : error;
      advance(run, Phase::kFailed);
    }
  }

  void create_prediction(const httplib::Request& req, httplib::Response& res, const std::string& run_id) {
    json body;
    try {
      body = req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
      return reply_error(res, 422, std::string("invalid JSON body: ") + e.what());
    }
    SearchOutcome outcome;
    PredictOptions popts;
    {
      std::lock_guard lock(mu);
      auto it = runs.find(run_id);
      if (it == runs.end()) return reply_error(res, 404, "unknown run " + run_id);
      const auto& run = it->second;
      if (run.phase != Phase::kSearchComplete && run.phase != Phase::kPredicting && run.phase != Phase::kDone) {
        return reply_error(res, 409, std::string("run is ") + phase_name(run.phase) + "; predictions need a completed search");
      }
      outcome = *run.outcome;
      popts.k = run.k;
      popts.mode = run.mode;
    }
    std::string dataset_id;
    try {
      dataset_id = body.at("dataset_id").get<std::string>();
      if (body.contains("k")) popts.k = body.at("k").get<std::size_t>();
      if (body.contains("mode")) popts.mode = ensemble_mode_from_string(body.at("mode").get<std::string>());
      if (popts.k < 1) throw Error("k must be at least 1");
    } catch (const json::exception& e) {
      return reply_error(res, 422, std::string("invalid prediction request: ") + e.what());
    } catch (const Error& e) {
      return reply_error(res, 422, e.what());
    }
    if (!dataset_exists(dataset_id)) return reply_error(res, 404, "unknown dataset " + dataset_id);
    Dataset test;
    try {
      test = read_csv_file(dataset_path(dataset_id).string(), std::nullopt);
      const Dataset train = read_csv_file((outcome.run_dir / "train.csv").string(), outcome.target);
      align_test(train, test);
    } catch (const Error& e) {
      return reply_error(res, 422, e.what());
    }

    std::string pred_id;
    {
      std::lock_guard lock(mu);
      pred_id = numbered("pred-", ++prediction_counter);
      PredictionState p;
      p.id = pred_id;
      p.run_id = run_id;
      p.mode = popts.mode;
      p.k = popts.k;
      predictions[pred_id] = std::move(p);
    }
    popts.worker_command = config.worker_command;
    popts.tag = pred_id;
    spawn_job([this, pred_id, run_id, outcome = std::move(outcome), test = std::move(test), popts] {
      execute_prediction(pred_id, run_id, outcome, test, popts);
    });
    reply(res, 202, {{"prediction_id", pred_id}, {"status", "queued"}});
  }

  void execute_prediction(const std::string& pred_id, const std::string& run_id, const SearchOutcome& outcome,
                          const Dataset& test, const PredictOptions& popts) {
    {
      std::lock_guard lock(mu);
      predictions.at(pred_id).status = "running";
      advance(runs.at(run_id), Phase::kPredicting);
    }
    PredictOutcome result;
    std::string error;
    const fs::path file = config.data_dir / "predictions" / (pred_id + ".csv");
    try {
      result = run_predict(outcome, test, popts);
      write_file_atomic(file, read_file(result.final_csv));
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(mu);
    auto& p = predictions.at(pred_id);
    p.warnings = result.warnings;
    p.used_pipelines = result.used_pipelines;
    if (error.empty()) {
      p.rows = result.labels.size();
      p.file = file;
      p.status = "done";
    } else {
      p.error = error;
      p.status = "failed";
    }
    advance(runs.at(run_id), Phase::kDone);
  }

  void routes() {
    server.Post("/api/v1/datasets", [this](const httplib::Request& req, httplib::Response& res) {
      upload_dataset(req, res);
    });
    server.Post("/api/v1/runs", [this](const httplib::Request& req, httplib::Response& res) { create_run(req, res); });
    server.Get(R"(/api/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      auto it = runs.find(req.matches[1]);
      if (it == runs.end()) return reply_error(res, 404, "unknown run " + std::string(req.matches[1]));
      reply(res, 200, run_json(it->second));
    });
    server.Post(R"(/api/v1/runs/([^/]+)/predict)", [this](const httplib::Request& req, httplib::Response& res) {
      create_prediction(req, res, req.matches[1]);
    });
    server.Get(R"(/api/v1/predictions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      auto it = predictions.find(req.matches[1]);
      if (it == predictions.end()) return reply_error(res, 404, "unknown prediction " + std::string(req.matches[1]));
      reply(res, 200, prediction_json(it->second));
    });
    server.Get(R"(/api/v1/predictions/([^/]+)/file)", [this](const httplib::Request& req, httplib::Response& res) {
      fs::path file;
      {
        std::lock_guard lock(mu);
        auto it = predictions.find(req.matches[1]);
        if (it == predictions.end()) return reply_error(res, 404, "unknown prediction " + std::string(req.matches[1]));
        if (it->second.status != "done") {
          return reply_error(res, 409, "prediction is " + it->second.status);
        }
        file = it->second.file;
      }
      res.status = 200;
      res.set_content(read_file(file), "text/csv");
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
  stop();
  wait_idle();
}

int Service::bind() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  return port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
  std::vector<std::thread> joinable;
  {
    std::unique_lock lock(impl_->mu);
    impl_->idle_cv.wait(lock, [this] { return impl_->active_jobs == 0; });
    joinable.swap(impl_->threads);
  }
  for (auto& t : joinable) t.join();
}

}  // namespace ens2
