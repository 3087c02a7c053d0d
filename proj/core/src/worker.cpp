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

#include "ens2/worker.hpp"

#include <errno.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

#include "ens2/artifacts.hpp"
#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/protocol.hpp"
#include "ens2/search.hpp"

namespace ens2 {

namespace proto = protocol;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigterm(int) { g_stop.store(true); }

void install_signal_handlers() {
  struct sigaction sa{};
  sa.sa_handler = on_sigterm;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGTERM, &sa, nullptr);
  signal(SIGPIPE, SIG_IGN);
}

// Serializes envelope writes from the main and heartbeat threads.
class EnvelopeWriter {
 public:
  EnvelopeWriter(int fd, std::string run_id) : fd_(fd), run_id_(std::move(run_id)) {}

  void send(proto::Payload payload) {
    proto::Envelope e{proto::kVersion, run_id_, std::move(payload)};
    const std::string line = proto::encode(e);
    std::lock_guard lock(mu_);
    write_all(fd_, line);
  }

 private:
  int fd_;
  std::string run_id_;
  std::mutex mu_;
};

class Heartbeat {
 public:
  explicit Heartbeat(EnvelopeWriter& out) : out_(out), thread_([this] { loop(); }) {}
  ~Heartbeat() {
    {
      std::lock_guard lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

 private:
  void loop() {
    std::uint64_t seq = 0;
    std::unique_lock lock(mu_);
    while (!done_) {
      lock.unlock();
      out_.send(proto::Heartbeat{seq++});
      lock.lock();
      cv_.wait_for(lock, kHeartbeatInterval, [this] { return done_; });
    }
  }

  EnvelopeWriter& out_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::thread thread_;
};

int serve_search(const proto::SearchRequest& req, EnvelopeWriter& out) {
  const auto start = Clock::now();
  Heartbeat heartbeat(out);

  TaskSpec spec;
  spec.metric = req.metric;
  spec.target = req.target;
  spec.time_budget_s = req.time_budget_s;
  spec.refit_fraction = req.refit_fraction;
  spec.seed = req.seed;
  spec.validate();

  const Dataset data = read_csv_file(req.dataset_path, req.target);
  const ArtifactStore store(req.artifact_dir);
  const auto budget = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(spec.time_budget_s));
  const auto search_budget = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(spec.time_budget_s * (1.0 - spec.refit_fraction)));

  SearchControl control;
  control.searcher_id = req.searcher_id;
  control.deadline = start + search_budget;
  control.stop_requested = [] { return g_stop.load(); };
  control.on_candidate = [&](const PipelineRecord& rec, const PredictionMatrix* oof) {
    if (oof) store.write_oof(rec.id, *oof, data.label_vocab());
    store.append_record(rec);
    std::fprintf(stderr, "[%s] %s score=%s\n", req.searcher_id.c_str(), rec.id.c_str(),
                 format_double(rec.validation_score).c_str());
    out.send(proto::SearchProgress{rec});
  };

  SearchReport report = run_search_strategy(req.searcher, data, spec, control);
  if (report.status == SearchStatus::kFailed) throw TaskError(report.reason);

  refit_best(report, data, store, start + budget, kRefitLimit, control.stop_requested);
  std::uint64_t refits = 0;
  for (const auto& r : report.pipelines) refits += r.artifact_ref.empty() ? 0 : 1;

  proto::SearchResult result;
  result.status = report.status;
  result.reason = report.reason;
  result.pipeline_count = report.pipelines.size();
  result.refit_count = refits;
  result.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
  out.send(result);
  return proto::kExitSuccess;
}

int serve_predict(const proto::PredictRequest& req, EnvelopeWriter& out) {
  const ArtifactStore store(req.artifact_dir);
  const FittedPipeline model = store.load_model(req.pipeline_id);
  const Dataset test = read_csv_file(req.test_dataset_path, std::nullopt);
  const PredictionMatrix probs = model.predict_proba(test);
  const auto& vocab = model.label_vocab();

  std::string csv = "row_index,predicted_label";
  for (const auto& v : vocab) csv += "," + csv_escape("p_" + v);
  csv += "\n";
  const LabelVector labels = argmax_rows(probs);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    csv += std::to_string(i) + "," + csv_escape(vocab[labels[i]]);
    for (std::size_t c = 0; c < probs.cols(); ++c) csv += "," + format_double(probs(i, c));
    csv += "\n";
  }
  write_file_atomic(req.output_path, csv);
  out.send(proto::PredictResult{req.pipeline_id, req.output_path, probs.rows()});
  return proto::kExitSuccess;
}

}  // namespace

std::optional<std::string> read_line(int fd) {
  std::string line;
  char c;
  while (true) {
    const ssize_t n = ::read(fd, &c, 1);
    if (n == 1) {
      if (c == '\n') return line;
      line.push_back(c);
    } else if (n == 0) {
      return std::nullopt;
    } else if (errno != EINTR) {
      return std::nullopt;
    }
  }
}

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

int run_worker(int in_fd, int out_fd) {
  install_signal_handlers();
  const auto line = read_line(in_fd);
  proto::Envelope request;
  try {
    if (!line) throw ProtocolError("no request on standard input", 0);
    request = proto::decode(*line);
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "protocol error: %s\n", e.what());
    EnvelopeWriter out(out_fd, "unknown");
    out.send(proto::ErrorInfo{proto::kExitProtocolError, e.what()});
    return proto::kExitProtocolError;
  }

  EnvelopeWriter out(out_fd, request.run_id);
  try {
    if (const auto* s = std::get_if<proto::SearchRequest>(&request.payload)) return serve_search(*s, out);
    if (const auto* p = std::get_if<proto::PredictRequest>(&request.payload)) return serve_predict(*p, out);
    throw ProtocolError("expected SearchRequest or PredictRequest, got " +
                            std::string(proto::to_string(request.kind())), 0);
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "protocol error: %s\n", e.what());
    out.send(proto::ErrorInfo{proto::kExitProtocolError, e.what()});
    return proto::kExitProtocolError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "task failure: %s\n", e.what());
    out.send(proto::ErrorInfo{proto::kExitTaskFailure, e.what()});
    return proto::kExitTaskFailure;
  }
}

}  // namespace ens2
