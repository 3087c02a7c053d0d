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

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "ens2/rng.hpp"
#include "ens2/tabular.hpp"

namespace ens2::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ens2-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string demo(const std::string& file) { return std::string(ENS2_DEMO_DIR) + "/" + file; }

inline std::vector<std::string> worker_command() { return {ENS2_EXE, "worker"}; }

inline std::vector<std::string> fake_worker(const std::string& mode) { return {ENS2_FAKE_WORKER, mode}; }

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Runs `ens2 <args>` through the shell with stderr merged into stdout.
inline CommandResult run_ens2(const std::string& args, const std::filesystem::path& cwd = {}) {
  std::string cmd;
  if (!cwd.empty()) cmd = "cd '" + cwd.string() + "' && ";
  cmd += std::string("'") + ENS2_EXE + "' " + args + " 2>&1";
  CommandResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Two Gaussian blobs in `features` dimensions with labels "a" and "b".
inline Dataset blobs(std::size_t rows, std::size_t features, std::uint64_t seed, double separation = 2.0) {
  Rng rng(seed);
  Schema schema;
  for (std::size_t f = 0; f < features; ++f) schema.columns.push_back({"f" + std::to_string(f), ColumnKind::kNumeric});
  schema.target = "y";
  std::vector<std::vector<Cell>> cells;
  LabelVector labels;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t y = i % 2;
    std::vector<Cell> row;
    for (std::size_t f = 0; f < features; ++f) {
      // Box-Muller from two uniforms.
      const double u1 = 1.0 - rng.uniform01(), u2 = rng.uniform01();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      row.emplace_back(z + (y == 1 && f == 0 ? separation : 0.0));
    }
    cells.push_back(std::move(row));
    labels.push_back(y);
  }
  return Dataset(schema, std::move(cells), std::move(labels), {"a", "b"});
}

}  // namespace ens2::testing
