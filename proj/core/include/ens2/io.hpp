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
#include <string>
#include <string_view>

namespace ens2 {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place, so readers see
// either the previous content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Appends whole lines with a single write(2) on an O_APPEND descriptor and
// fsyncs. A crash can at worst leave a trailing partial line, which readers
// of line-oriented files must drop.
void append_line(const std::filesystem::path& path, std::string_view line);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace ens2
