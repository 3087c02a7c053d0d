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
#include <string>
#include <string_view>
#include <variant>

#include "ens2/search.hpp"
#include "ens2/tabular.hpp"

namespace ens2::protocol {

// Newline-delimited JSON envelopes exchanged over a worker's stdin/stdout:
//
//   {"v":1,"kind":"...","run_id":"...","payload":{...}}
//
// Field order is fixed, so encoding is byte-deterministic.

inline constexpr int kVersion = 1;

enum class Kind { kSearchRequest, kSearchProgress, kSearchResult, kPredictRequest, kPredictResult,
                  kHeartbeat, kError };

std::string_view to_string(Kind kind);

struct SearchRequest {
  std::string dataset_path;
  std::string target;
  Metric metric = Metric::kAccuracy;
  double time_budget_s = 0.0;
  double refit_fraction = 0.25;
  std::uint64_t seed = 0;
  std::string artifact_dir;
  SearcherKind searcher = SearcherKind::kGridTemplate;
  std::string searcher_id;

  bool operator==(const SearchRequest&) const = default;
};

struct SearchProgress {
  PipelineRecord record;

  bool operator==(const SearchProgress&) const = default;
};

struct SearchResult {
  SearchStatus status = SearchStatus::kComplete;
  std::string reason;
  std::uint64_t pipeline_count = 0;
  std::uint64_t refit_count = 0;
  double elapsed_s = 0.0;

  bool operator==(const SearchResult&) const = default;
};

struct PredictRequest {
  std::string pipeline_id;
  std::string artifact_dir;
  std::string test_dataset_path;
  std::string output_path;

  bool operator==(const PredictRequest&) const = default;
};

struct PredictResult {
  std::string pipeline_id;
  std::string output_path;
  std::uint64_t rows = 0;

  bool operator==(const PredictResult&) const = default;
};

struct Heartbeat {
  std::uint64_t seq = 0;

  bool operator==(const Heartbeat&) const = default;
};

struct ErrorInfo {
  int code = 3;
  std::string message;

  bool operator==(const ErrorInfo&) const = default;
};

using Payload = std::variant<SearchRequest, SearchProgress, SearchResult, PredictRequest, PredictResult,
                             Heartbeat, ErrorInfo>;

struct Envelope {
  int version = kVersion;
  std::string run_id;
  Payload payload;

  Kind kind() const { return static_cast<Kind>(payload.index()); }

  bool operator==(const Envelope&) const = default;
};

// One UTF-8 line terminated by '\n'. Throws Error for an empty run_id.
std::string encode(const Envelope& envelope);

// Strict: throws ProtocolError for malformed JSON, an unsupported version,
// an unknown kind or a missing/mistyped field. A trailing '\n' is accepted.
Envelope decode(std::string_view line);

// Worker exit codes.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitProtocolError = 2;
inline constexpr int kExitTaskFailure = 3;
inline constexpr int kExitBudgetKill = 124;

}  // namespace ens2::protocol
