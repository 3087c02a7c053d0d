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

namespace ens2 {

// Exit codes: 0 success, 2 bad input or missing artifacts, 3 task failure.
inline constexpr int kCliOk = 0;
inline constexpr int kCliUsage = 2;
inline constexpr int kCliTaskFailure = 3;

// `ens2 search|predict|benchmark|serve`, plus the internal `worker` mode.
int run_cli(int argc, char** argv);

}  // namespace ens2
