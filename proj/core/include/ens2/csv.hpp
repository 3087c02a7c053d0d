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

#include <string>
#include <string_view>
#include <vector>

namespace ens2 {

// Splits RFC 4180 text into records of raw field strings. Accepts LF or CRLF
// line endings; blank lines are skipped. Throws ParseError on broken quoting.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view bytes);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view s);

}  // namespace ens2
