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

#include "ens2/config.hpp"

#include <charconv>
#include <cmath>

#include "ens2/error.hpp"
#include "ens2/io.hpp"

namespace ens2 {

namespace {

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string bare_key() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
          c == '.') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  ConfigScalar scalar() {
    skip_ws();
    if (pos_ >= s_.size()) fail("expected a value");
    if (s_[pos_] == '"') return quoted();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
           s_[pos_] != '\t') {
      ++pos_;
    }
    const std::string_view tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), i);
    if (ec == std::errc() && p == tok.data() + tok.size()) return i;
    double d = 0.0;
    auto [p2, ec2] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec2 == std::errc() && p2 == tok.data() + tok.size() && std::isfinite(d)) return d;
    fail("cannot parse value '" + std::string(tok) + "'");
  }

  ConfigValue value() {
    if (!consume('[')) {
      ConfigScalar s = scalar();
      return std::visit([](auto&& v) -> ConfigValue { return v; }, s);
    }
    std::vector<ConfigScalar> items;
    if (consume(']')) return items;
    while (true) {
      items.push_back(scalar());
      if (consume(']')) break;
      if (!consume(',')) fail("expected ',' or ']' in array");
      if (consume(']')) break;  // trailing comma
    }
    return items;
  }

 private:
  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    fail("unterminated string");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

const char* kind_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "boolean";
    default: return "array";
  }
}

[[noreturn]] void type_error(const std::string& key, const char* want, const ConfigValue& got) {
  throw ParseError("config key '" + key + "' must be a " + want + ", got " + kind_name(got));
}

}  // namespace

void ConfigTable::set(const std::string& key, ConfigValue value) {
  if (values_.contains(key)) throw ParseError("config key '" + key + "' defined twice");
  values_.emplace(key, std::move(value));
}

std::optional<std::string> ConfigTable::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  type_error(key, "string", it->second);
}

std::optional<std::int64_t> ConfigTable::get_int(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  type_error(key, "integer", it->second);
}

std::optional<double> ConfigTable::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  type_error(key, "number", it->second);
}

std::optional<bool> ConfigTable::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* b = std::get_if<bool>(&it->second)) return *b;
  type_error(key, "boolean", it->second);
}

std::optional<std::vector<std::string>> ConfigTable::get_strings(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  const auto* arr = std::get_if<std::vector<ConfigScalar>>(&it->second);
  if (!arr) type_error(key, "array of strings", it->second);
  std::vector<std::string> out;
  for (const auto& v : *arr) {
    const auto* s = std::get_if<std::string>(&v);
    if (!s) throw ParseError("config key '" + key + "' must contain only strings");
    out.push_back(*s);
  }
  return out;
}

std::optional<std::vector<std::int64_t>> ConfigTable::get_ints(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  const auto* arr = std::get_if<std::vector<ConfigScalar>>(&it->second);
  if (!arr) type_error(key, "array of integers", it->second);
  std::vector<std::int64_t> out;
  for (const auto& v : *arr) {
    const auto* i = std::get_if<std::int64_t>(&v);
    if (!i) throw ParseError("config key '" + key + "' must contain only integers");
    out.push_back(*i);
  }
  return out;
}

const ConfigTable* ConfigDocument::table(const std::string& name) const {
  auto it = tables.find(name);
  return it == tables.end() ? nullptr : &it->second;
}

const std::vector<ConfigTable>& ConfigDocument::array(const std::string& name) const {
  static const std::vector<ConfigTable> kEmpty;
  auto it = arrays.find(name);
  return it == arrays.end() ? kEmpty : it->second;
}

ConfigDocument parse_config(std::string_view text) {
  ConfigDocument doc;
  ConfigTable* current = &doc.root;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = nl + 1;
    ++line_no;

    LineParser p(line, line_no);
    if (p.at_end_or_comment()) continue;
    if (p.consume('[')) {
      const bool is_array = p.consume('[');
      const std::string name = p.bare_key();
      if (!p.consume(']') || (is_array && !p.consume(']'))) p.fail("malformed table header");
      if (!p.at_end_or_comment()) p.fail("unexpected text after table header");
      if (is_array) {
        auto& list = doc.arrays[name];
        list.emplace_back();
        current = &list.back();
      } else {
        if (doc.tables.contains(name)) p.fail("table [" + name + "] defined twice");
        current = &doc.tables[name];
      }
      continue;
    }
    const std::string key = p.bare_key();
    if (!p.consume('=')) p.fail("expected '=' after key '" + key + "'");
    ConfigValue v = p.value();
    if (!p.at_end_or_comment()) p.fail("unexpected text after value");
    try {
      current->set(key, std::move(v));
    } catch (const ParseError& e) {
      p.fail(e.what());
    }
  }
  return doc;
}

ConfigDocument read_config_file(const std::string& path) {
  return parse_config(read_file(path));
}

}  // namespace ens2
