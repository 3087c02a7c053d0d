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

#include "cli.hpp"

#include <signal.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ens2/benchmark.hpp"
#include "ens2/config.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/orchestrator.hpp"
#include "ens2/worker.hpp"
#include "service.hpp"

namespace ens2 {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> self_worker_command() {
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (ec) throw Error("cannot locate the ens2 executable: " + ec.message());
  return {exe.string(), "worker"};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Runs `body`, mapping exceptions onto exit codes.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCliUsage;
  } catch (const TaskError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCliTaskFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCliUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCliTaskFailure;
  }
}

std::string default_run_dir() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "runs/run-%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string search_summary(const SearchOutcome& o) {
  std::ostringstream out;
  out << "run " << o.run_id << " (" << o.run_dir.string() << ")\n";
  out << "budget " << format_double(o.plan.time_budget_s) << " s, grace " << format_double(o.plan.grace_s())
      << " s, seed " << o.plan.seed << "\n\nworkers:\n";
  for (const auto& w : o.workers) {
    out << "  " << w.searcher_id << ": " << to_string(w.status) << ", " << w.pipelines << " pipelines, "
        << format_double(std::round(w.elapsed_s * 100.0) / 100.0) << " s";
    if (w.status != WorkerStatus::kComplete) out << " (" << w.diagnostics.substr(0, w.diagnostics.find('\n')) << ")";
    out << "\n";
  }
  out << "\nleaderboard (" << o.merged.size() << " pipelines):\n";
  const std::size_t shown = std::min<std::size_t>(10, o.merged.size());
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& r = o.merged[i];
    char score[32];
    std::snprintf(score, sizeof score, "%.4f", r.validation_score);
    out << "  " << (i + 1) << ". " << r.id << "  " << score << "  " << CandidatePipeline{r.steps}.describe()
        << (r.artifact_ref.empty() ? "  [not refit]" : "") << "\n";
  }
  return out.str();
}

struct SearchArgs {
  std::string train;
  std::string target;
  std::optional<double> budget;
  std::string workers;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> grace;
  std::optional<double> refit_fraction;
  std::string metric;
  std::optional<std::size_t> k;
  bool retry = false;
  std::string config;
};

int cmd_search(const SearchArgs& a) {
  return guarded([&] {
    ConfigDocument doc;
    if (!a.config.empty()) doc = read_config_file(a.config);
    static const ConfigTable kEmpty;
    const ConfigTable& defaults = doc.table("defaults") ? *doc.table("defaults") : kEmpty;

    SearchPlan plan;
    plan.workers = workers_from_document(doc);
    if (!a.workers.empty()) {
      std::vector<WorkerSpec> chosen;
      for (const auto& name : split_list(a.workers)) {
        auto it = std::find_if(plan.workers.begin(), plan.workers.end(),
                               [&](const WorkerSpec& w) { return w.searcher_id == name; });
        if (it == plan.workers.end()) throw Error("unknown worker '" + name + "'");
        chosen.push_back(*it);
      }
      plan.workers = chosen;
    }
    plan.time_budget_s = a.budget.value_or(defaults.get_double("budget_s").value_or(60.0));
    plan.grace_period_s = a.grace ? a.grace : defaults.get_double("grace_s");
    plan.refit_fraction = a.refit_fraction.value_or(defaults.get_double("refit_fraction").value_or(0.25));
    plan.seed = a.seed.value_or(static_cast<std::uint64_t>(defaults.get_int("seed").value_or(0)));
    plan.metric = metric_from_string(!a.metric.empty() ? a.metric : defaults.get_string("metric").value_or("accuracy"));
    plan.k_top = a.k.value_or(static_cast<std::size_t>(defaults.get_int("k").value_or(3)));
    plan.retry_failed = a.retry || defaults.get_bool("retry").value_or(false);
    plan.validate();

    const Dataset train = read_csv_file(a.train, a.target);
    const fs::path run_dir = a.out.empty() ? fs::path(default_run_dir()) : fs::path(a.out);
    OrchestratorOptions opts;
    opts.worker_command = self_worker_command();
    SearchOutcome outcome;
    try {
      outcome = run_search(train, plan, run_dir, opts);
    } catch (const TaskError&) {
      try {
        std::cerr << search_summary(SearchOutcome::load(run_dir));
      } catch (const std::exception&) {
      }
      throw;
    }
    const std::string summary = search_summary(outcome);
    write_file_atomic(run_dir / "summary.txt", summary);
    std::cout << summary;
    return kCliOk;
  });
}

struct PredictArgs {
  std::string run;
  std::string test;
  std::string mode = "voting";
  std::optional<std::size_t> k;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  return guarded([&] {
    const SearchOutcome outcome = SearchOutcome::load(a.run);
    const Dataset test = read_csv_file(a.test, std::nullopt);
    PredictOptions opts;
    opts.mode = ensemble_mode_from_string(a.mode);
    opts.k = a.k.value_or(outcome.plan.k_top);
    opts.worker_command = self_worker_command();
    const PredictOutcome result = run_predict(outcome, test, opts);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    const fs::path out = a.out.empty() ? result.final_csv : fs::path(a.out);
    if (out != result.final_csv) write_file_atomic(out, read_file(result.final_csv));
    std::cout << "wrote " << result.labels.size() << " predictions to " << out.string() << " using";
    for (const auto& id : result.used_pipelines) std::cout << " " << id;
    std::cout << " (" << to_string(opts.mode) << ")\n";
    return kCliOk;
  });
}

int cmd_benchmark(const std::string& config, const std::string& from_scores, const std::string& out) {
  return guarded([&] {
    if (!from_scores.empty()) {
      write_report(ScoreTable::from_csv(read_file(from_scores)), out);
      std::cout << "report written to " << out << "\n";
      return kCliOk;
    }
    if (config.empty()) throw Error("benchmark needs --config or --from-scores");
    const BenchmarkConfig cfg = BenchmarkConfig::from_file(config);
    BenchmarkRunOptions opts;
    opts.worker_command = self_worker_command();
    opts.log = [](const std::string& line) { std::cerr << line << "\n"; };
    run_benchmark(cfg, out, opts);
    std::cout << read_file(fs::path(out) / "report.md");
    return kCliOk;
  });
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  std::size_t slots = 2;
  std::uint64_t seed = 0;
  std::optional<double> grace;
  std::string config;
};

int cmd_serve(const ServeArgs& a) {
  return guarded([&] {
    ServiceConfig cfg;
    cfg.host = a.host;
    cfg.port = a.port;
    std::string dir = a.data_dir;
    if (dir.empty()) {
      const char* env = std::getenv("ENS2_DATA_DIR");
      dir = env && *env ? env : "ens2-data";
    }
    cfg.data_dir = dir;
    cfg.slots = a.slots;
    cfg.seed = a.seed;
    cfg.grace_s = a.grace;
    cfg.worker_command = self_worker_command();
    if (!a.config.empty()) cfg.workers = workers_from_document(read_config_file(a.config));

    // Route SIGINT/SIGTERM to a thread that stops the server.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    Service service(cfg);
    const int port = service.bind();
    std::cout << "listening on http://" << cfg.host << ":" << port << " (data in " << cfg.data_dir.string() << ")"
              << std::endl;
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&set, &sig);
      service.stop();
    });
    service.serve();
    // serve() also returns on bind failures; wake the waiter either way.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    service.wait_idle();
    return kCliOk;
  });
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Meta-search over pipeline searchers with voting and stacking ensembles", "ens2"};
  app.require_subcommand(1);

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Run every worker on a training CSV and rank the pipelines");
  s->add_option("--train", search.train, "Training CSV")->required();
  s->add_option("--target", search.target, "Target column")->required();
  s->add_option("--budget", search.budget, "Time budget per worker in seconds");
  s->add_option("--workers", search.workers, "Comma-separated worker ids (default: all)");
  s->add_option("--out", search.out, "Run directory");
  s->add_option("--seed", search.seed, "Seed shared by every worker");
  s->add_option("--grace", search.grace, "Grace period before a force-kill, seconds");
  s->add_option("--refit-fraction", search.refit_fraction, "Share of the budget reserved for refitting");
  s->add_option("--metric", search.metric, "accuracy or logloss");
  s->add_option("--k", search.k, "Default committee size stored with the run");
  s->add_flag("--retry", search.retry, "Re-run a failed worker once");
  s->add_option("--config", search.config, "Config file with [defaults] and [[worker]] entries");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Predict a test CSV with a finished run");
  p->add_option("--run", predict.run, "Run directory written by search")->required();
  p->add_option("--test", predict.test, "Test CSV")->required();
  p->add_option("--mode", predict.mode, "voting or stacking")->check(CLI::IsMember({"voting", "stacking"}));
  p->add_option("--k", predict.k, "Committee size for voting");
  p->add_option("--out", predict.out, "Output CSV (default: <run>/predictions/final.csv)");

  std::string bench_config, bench_scores, bench_out = "benchmark-report";
  auto* b = app.add_subcommand("benchmark", "Score systems over datasets and seeds and write a report");
  b->add_option("--config", bench_config, "Benchmark config file");
  b->add_option("--from-scores", bench_scores, "Rebuild the report from an existing scores.csv");
  b->add_option("--out", bench_out, "Report directory");

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Serve the HTTP API");
  v->add_option("--host", serve.host, "Bind address");
  v->add_option("--port", serve.port, "Port (0 picks a free one)");
  v->add_option("--data-dir", serve.data_dir, "Storage root (default: $ENS2_DATA_DIR or ./ens2-data)");
  v->add_option("--slots", serve.slots, "Concurrent searches and predictions");
  v->add_option("--seed", serve.seed, "Base seed for run seeds");
  v->add_option("--grace", serve.grace, "Grace period before a force-kill, seconds");
  v->add_option("--config", serve.config, "Config file with [[worker]] entries");

  auto* w = app.add_subcommand("worker", "Serve one worker request on stdin/stdout");
  w->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kCliUsage;
  }

  if (*w) return run_worker(0, 1);
  if (*s) return cmd_search(search);
  if (*p) return cmd_predict(predict);
  if (*b) return cmd_benchmark(bench_config, bench_scores, bench_out);
  return cmd_serve(serve);
}

}  // namespace ens2
