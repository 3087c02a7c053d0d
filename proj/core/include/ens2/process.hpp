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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ens2/protocol.hpp"

namespace ens2 {

// One worker process to supervise. The child gets `request_line` on stdin
// (then EOF), envelopes are read from its stdout and stderr is appended to
// `log_path`.
struct WorkerJob {
  std::string name;
  std::vector<std::string> argv;
  std::string request_line;
  std::filesystem::path log_path;
  // SIGTERM once the budget elapses, SIGKILL after a further grace period.
  double budget_s = 0.0;
  double grace_s = 0.0;
  // Called on the supervising thread for every decoded envelope.
  std::function<void(const protocol::Envelope&)> on_envelope;
};

struct WorkerExit {
  // Exit status, or protocol::kExitBudgetKill when the supervisor had to
  // force-kill the process. -1 when it could not be started.
  int exit_code = -1;
  bool terminated = false;  // got SIGTERM at the budget
  bool killed = false;      // got SIGKILL after the grace period
  std::optional<int> signal;  // terminating signal, if any
  std::optional<protocol::Envelope> last_envelope;  // last non-heartbeat envelope
  std::size_t envelopes = 0;
  std::size_t heartbeats = 0;
  std::vector<std::string> protocol_errors;
  double max_silence_s = 0.0;  // longest gap between two envelopes
  double elapsed_s = 0.0;
  std::string spawn_error;
};

// Runs every job concurrently and returns once all have exited, in job order.
std::vector<WorkerExit> supervise(std::vector<WorkerJob> jobs);

}  // namespace ens2
