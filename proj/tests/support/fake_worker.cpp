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

// Misbehaving worker used to exercise the supervisor. Usage:
//
//   ens2_fake_worker <mode>
//
// healthy       behave like `ens2 worker`
// crash         read the request, then SIGKILL itself
// fail          answer with an Error envelope and exit 3
// garbage       print a non-JSON line and exit 0
// hang          run a grid search, publish its artifacts, then ignore
//               SIGTERM and sleep without ever reporting a result
// hang-silent   ignore SIGTERM and sleep without output
// fail-predict  fail PredictRequests, serve everything else normally

#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <string>

#include "ens2/artifacts.hpp"
#include "ens2/protocol.hpp"
#include "ens2/search.hpp"
#include "ens2/worker.hpp"

namespace {

namespace proto = ens2::protocol;

[[noreturn]] void sleep_forever() {
  signal(SIGTERM, SIG_IGN);
  while (true) pause();
}

// Hands an already-consumed request line to the real worker.
int serve_line(const std::string& line) {
  int fds[2];
  if (pipe(fds) != 0) return 3;
  ens2::write_all(fds[1], line + "\n");
  close(fds[1]);
  const int code = ens2::run_worker(fds[0], 1);
  close(fds[0]);
  return code;
}

void send(const proto::Envelope& e) { ens2::write_all(1, proto::encode(e)); }

int hang(const proto::Envelope& env) {
  signal(SIGTERM, SIG_IGN);
  const auto& req = std::get<proto::SearchRequest>(env.payload);
  const ens2::Dataset data = ens2::read_csv_file(req.dataset_path, req.target);
  const ens2::ArtifactStore store(req.artifact_dir);
  ens2::TaskSpec spec;
  spec.target = req.target;
  spec.seed = req.seed;
  ens2::SearchControl control;
  control.searcher_id = req.searcher_id;
  std::size_t emitted = 0;
  control.on_candidate = [&](const ens2::PipelineRecord& rec, const ens2::PredictionMatrix* oof) {
    if (oof) store.write_oof(rec.id, *oof, data.label_vocab());
    store.append_record(rec);
    send({proto::kVersion, env.run_id, proto::SearchProgress{rec}});
    ++emitted;
  };
  control.stop_requested = [&] { return emitted >= 4; };
  auto report = ens2::grid_template_search(data, spec, control);
  ens2::refit_best(report, data, store, ens2::Clock::time_point::max(), 2);
  sleep_forever();
}

}  // namespace

int main(int argc, char** argv) {
  signal(SIGPIPE, SIG_IGN);
  const std::string mode = argc > 1 ? argv[1] : "healthy";
  if (mode == "healthy") return ens2::run_worker(0, 1);
  if (mode == "hang-silent") sleep_forever();

  const auto line = ens2::read_line(0);
  if (!line) return 2;
  if (mode == "crash") {
    kill(getpid(), SIGKILL);
    sleep_forever();
  }
  if (mode == "garbage") {
    std::puts("this is not an envelope");
    return 0;
  }
  const proto::Envelope env = proto::decode(*line);
  if (mode == "fail") {
    send({proto::kVersion, env.run_id, proto::ErrorInfo{proto::kExitTaskFailure, "injected failure"}});
    return proto::kExitTaskFailure;
  }
  if (mode == "hang") return hang(env);
  if (mode == "fail-predict") {
    if (env.kind() == proto::Kind::kPredictRequest) {
      send({proto::kVersion, env.run_id, proto::ErrorInfo{proto::kExitTaskFailure, "injected predict failure"}});
      return proto::kExitTaskFailure;
    }
    return serve_line(*line);
  }
  std::fprintf(stderr, "unknown mode %s\n", mode.c_str());
  return 2;
}
