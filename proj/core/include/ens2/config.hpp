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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ens2 {

// A small TOML subset: `key = value` pairs, `[table]` headers and
// `[[array]]` table arrays. Values are strings, integers, floats, booleans
// or single-line arrays of those. `#` starts a comment outside strings.

using ConfigScalar = std::variant<std::string, std::int64_t, double, bool>;
using ConfigValue = std::variant<std::string, std::int64_t, double, bool, std::vector<ConfigScalar>>;

class ConfigTable {
 public:
  bool contains(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, ConfigValue value);

  // Typed getters throw ParseError naming the key on a type mismatch.
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;  // accepts integers
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_strings(const std::string& key) const;
  std::optional<std::vector<std::int64_t>> get_ints(const std::string& key) const;

  const std::map<std::string, ConfigValue>& values() const noexcept { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
};

struct ConfigDocument {
  ConfigTable root;
  std::map<std::string, ConfigTable> tables;
  std::map<std::string, std::vector<ConfigTable>> arrays;

  const ConfigTable* table(const std::string& name) const;
  const std::vector<ConfigTable>& array(const std::string& name) const;
};

// Throws ParseError with the 1-based line number.
ConfigDocument parse_config(std::string_view text);
ConfigDocument read_config_file(const std::string& path);

}  // namespace ens2
