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
#include <optional>
#include <string>
#include <string_view>

namespace ens2 {

// Upper bound on the number of best pipelines a search worker refits.
inline constexpr std::size_t kRefitLimit = 8;

// Heartbeat period of a search worker.
inline constexpr std::chrono::milliseconds kHeartbeatInterval{1000};

// Reads one request envelope line from `in_fd` and serves it, writing
// envelopes to `out_fd`. Returns the process exit code. SIGTERM asks a search
// to stop early; artifacts published so far remain valid.
int run_worker(int in_fd, int out_fd);

// Reads bytes up to and excluding the next '\n'. nullopt at EOF before any
// newline.
std::optional<std::string> read_line(int fd);

// Writes all of `bytes`; returns false when the descriptor is closed.
bool write_all(int fd, std::string_view bytes);

}  // namespace ens2
