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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ens2/orchestrator.hpp"

namespace ens2 {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  // Storage root; holds datasets/, runs/ and predictions/.
  std::filesystem::path data_dir;
  std::size_t slots = 2;  // concurrently executing searches or predictions
  std::uint64_t seed = 0;  // run seeds derive from this and a counter
  std::vector<std::string> worker_command;
  std::vector<WorkerSpec> workers = default_workers();
  std::optional<double> grace_s;
};

// HTTP front end over the orchestrator:
//
//   POST /api/v1/datasets                 multipart CSV upload
//   POST /api/v1/runs                     start a search
//   GET  /api/v1/runs/{id}                run status
//   POST /api/v1/runs/{id}/predict        start a prediction
//   GET  /api/v1/predictions/{id}         prediction status
//   GET  /api/v1/predictions/{id}/file    prediction CSV
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the socket; returns the port. Throws Error when binding fails.
  int bind();
  // Serves until stop(); call bind() first.
  void serve();
  void stop();
  // Blocks until every background search and prediction has finished.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ens2
