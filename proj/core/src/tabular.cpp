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

#include "ens2/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "json.hpp"

namespace ens2 {

using json = nlohmann::json;

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::kNumeric ? "numeric" : "categorical";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "numeric") return ColumnKind::kNumeric;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw ParseError("unknown column kind '" + std::string(s) + "'");
}

std::string_view to_string(Metric m) {
  return m == Metric::kAccuracy ? "accuracy" : "logloss";
}

Metric metric_from_string(std::string_view s) {
  if (s == "accuracy") return Metric::kAccuracy;
  if (s == "logloss") return Metric::kLogloss;
  throw Error("unknown metric '" + std::string(s) + "'");
}

void Schema::validate() const {
  if (columns.empty()) throw ParseError("schema has no feature columns");
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) {
      throw ParseError("duplicate column name '" + c.name + "'");
    }
  }
  if (target && seen.contains(*target)) {
    throw ParseError("target '" + *target + "' is also a feature column");
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

Dataset::Dataset(Schema schema, std::vector<std::vector<Cell>> rows,
                 std::optional<LabelVector> labels, std::vector<std::string> label_vocab)
    : schema_(std::move(schema)),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      label_vocab_(std::move(label_vocab)) {
  schema_.validate();
  const std::size_t width = schema_.columns.size();
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != width) {
      throw ParseError("row " + std::to_string(r) + " has " + std::to_string(rows_[r].size()) +
                       " cells, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const Cell& cell = rows_[r][c];
      if (is_missing(cell)) continue;
      const bool numeric = std::holds_alternative<double>(cell);
      if (numeric != (schema_.columns[c].kind == ColumnKind::kNumeric)) {
        throw ParseError("cell (" + std::to_string(r) + ", " + schema_.columns[c].name +
                         ") does not match the column kind");
      }
    }
  }
  if (label_vocab_.empty()) throw ParseError("label vocabulary is empty");
  if (!std::is_sorted(label_vocab_.begin(), label_vocab_.end()) ||
      std::adjacent_find(label_vocab_.begin(), label_vocab_.end()) != label_vocab_.end()) {
    throw ParseError("label vocabulary must be sorted and duplicate-free");
  }
  if (labels_) {
    if (labels_->size() != rows_.size()) throw ParseError("label count does not match rows");
    for (auto l : *labels_) {
      if (l >= label_vocab_.size()) throw ParseError("label index out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& row_indices) const {
  std::vector<std::vector<Cell>> rows;
  rows.reserve(row_indices.size());
  std::optional<LabelVector> labels;
  if (labels_) labels.emplace();
  for (auto i : row_indices) {
    rows.push_back(rows_.at(i));
    if (labels_) labels->push_back((*labels_)[i]);
  }
  return Dataset(schema_, std::move(rows), std::move(labels), label_vocab_);
}

void TaskSpec::validate() const {
  if (!(time_budget_s > 0.0)) throw Error("time budget must be positive");
  if (!(refit_fraction >= 0.0 && refit_fraction <= 1.0)) {
    throw Error("refit fraction must lie in [0, 1]");
  }
}

void PipelineRecord::validate() const {
  if (id.empty()) throw Error("pipeline record has empty id");
  if (steps.empty()) throw Error("pipeline " + id + " has no steps");
  if (!std::isfinite(validation_score)) throw Error("pipeline " + id + " has non-finite score");
}

namespace {

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return {};
}

}  // namespace

Dataset parse_csv(std::string_view bytes, const std::optional<std::string>& target) {
  auto records = parse_csv_records(bytes);
  if (records.empty()) throw ParseError("missing header row");
  const auto header = records.front();
  const std::size_t width = header.size();
  if (records.size() == 1) throw ParseError("empty dataset: no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw ParseError("ragged row " + std::to_string(r) + ": " +
                       std::to_string(records[r].size()) + " cells, header has " +
                       std::to_string(width));
    }
  }

  std::optional<std::size_t> target_col;
  if (target) {
    auto it = std::find(header.begin(), header.end(), *target);
    if (it == header.end()) throw ParseError("unknown target column '" + *target + "'");
    target_col = static_cast<std::size_t>(it - header.begin());
  }

  Schema schema;
  schema.target = target;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (target_col && c == *target_col) continue;
    bool numeric = true;
    for (std::size_t r = 1; r < records.size() && numeric; ++r) {
      const auto& s = records[r][c];
      if (!s.empty() && !parse_number(s)) numeric = false;
    }
    schema.columns.push_back(
        {header[c], numeric ? ColumnKind::kNumeric : ColumnKind::kCategorical});
    feature_cols.push_back(c);
  }

  std::vector<std::vector<Cell>> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    std::vector<Cell> row;
    row.reserve(feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const auto& s = records[r][feature_cols[f]];
      if (s.empty()) {
        row.emplace_back(std::monostate{});
      } else if (schema.columns[f].kind == ColumnKind::kNumeric) {
        row.emplace_back(*parse_number(s));
      } else {
        row.emplace_back(s);
      }
    }
    rows.push_back(std::move(row));
  }

  std::optional<LabelVector> labels;
  std::vector<std::string> vocab;
  if (target_col) {
    std::set<std::string> classes;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& s = records[r][*target_col];
      if (s.empty()) throw ParseError("missing target value on data row " + std::to_string(r));
      classes.insert(s);
    }
    vocab.assign(classes.begin(), classes.end());
    labels.emplace();
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& s = records[r][*target_col];
      labels->push_back(static_cast<std::size_t>(
          std::lower_bound(vocab.begin(), vocab.end(), s) - vocab.begin()));
    }
  } else {
    // Unlabeled data gets a placeholder vocabulary until aligned to a train set.
    vocab.push_back("");
  }
  return Dataset(std::move(schema), std::move(rows), std::move(labels), std::move(vocab));
}

Dataset read_csv_file(const std::string& path, const std::optional<std::string>& target) {
  return parse_csv(read_file(path), target);
}

std::string to_csv(const Dataset& d) {
  std::ostringstream out;
  const auto& cols = d.schema().columns;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(cols[c].name);
  }
  const bool with_target = d.has_labels() && d.schema().target;
  if (with_target) out << ',' << csv_escape(*d.schema().target);
  out << '\n';
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    const auto& row = d.rows()[r];
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(cell_text(row[c]));
    }
    if (with_target) out << ',' << csv_escape(d.label_vocab()[(*d.labels())[r]]);
    out << '\n';
  }
  return out.str();
}

FeatureLabelView split_features_labels(const Dataset& d) {
  if (!d.has_labels()) throw Error("dataset has no labels");
  return {std::span<const std::vector<Cell>>(d.rows()),
          std::span<const std::size_t>(*d.labels())};
}

CategorySets categories_of(const Dataset& d) {
  CategorySets known(d.num_features());
  for (const auto& row : d.rows()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (const auto* s = std::get_if<std::string>(&row[c])) known[c].insert(*s);
    }
  }
  return known;
}

Dataset align_to_schema(const Schema& schema, const std::vector<std::string>& label_vocab,
                        const CategorySets& known, const Dataset& test) {
  const auto& train_cols = schema.columns;
  if (known.size() != train_cols.size()) throw Error("align: category sets do not match schema");
  std::vector<std::size_t> source(train_cols.size());
  std::vector<std::string> missing;
  for (std::size_t c = 0; c < train_cols.size(); ++c) {
    auto idx = test.schema().index_of(train_cols[c].name);
    if (!idx) {
      missing.push_back(train_cols[c].name);
    } else {
      source[c] = *idx;
    }
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ParseError("test data is missing feature columns: " + names);
  }

  std::vector<std::vector<Cell>> rows;
  rows.reserve(test.num_rows());
  for (const auto& test_row : test.rows()) {
    std::vector<Cell> row;
    row.reserve(train_cols.size());
    for (std::size_t c = 0; c < train_cols.size(); ++c) {
      const Cell& cell = test_row[source[c]];
      if (is_missing(cell)) {
        row.emplace_back(std::monostate{});
      } else if (train_cols[c].kind == ColumnKind::kNumeric) {
        if (const auto* v = std::get_if<double>(&cell)) {
          row.emplace_back(*v);
        } else {
          auto parsed = parse_number(std::get<std::string>(cell));
          if (parsed) {
            row.emplace_back(*parsed);
          } else {
            row.emplace_back(std::monostate{});
          }
        }
      } else {
        std::string text = cell_text(cell);
        if (!known[c].contains(text)) text = std::string(kUnknownCategory);
        row.emplace_back(std::move(text));
      }
    }
    rows.push_back(std::move(row));
  }

  std::optional<LabelVector> labels;
  if (test.has_labels()) {
    const auto& vocab = label_vocab;
    labels.emplace();
    labels->reserve(test.num_rows());
    for (auto l : *test.labels()) {
      const auto& name = test.label_vocab()[l];
      auto it = std::lower_bound(vocab.begin(), vocab.end(), name);
      if (it == vocab.end() || *it != name) {
        throw ParseError("test label '" + name + "' not present in training labels");
      }
      labels->push_back(static_cast<std::size_t>(it - vocab.begin()));
    }
  }
  return Dataset(schema, std::move(rows), std::move(labels), label_vocab);
}

Dataset align_test(const Dataset& train, const Dataset& test) {
  return align_to_schema(train.schema(), train.label_vocab(), categories_of(train), test);
}

std::string manifest_json(const Dataset& d) {
  json cols = json::array();
  for (const auto& c : d.schema().columns) {
    cols.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
  }
  json j = {{"columns", cols},
            {"target", d.schema().target ? json(*d.schema().target) : json(nullptr)},
            {"rows", d.num_rows()},
            {"label_vocab", d.has_labels() ? json(d.label_vocab()) : json::array()}};
  return j.dump(2) + "\n";
}

void write_manifest(const Dataset& d, const std::string& path) {
  write_file_atomic(path, manifest_json(d));
}

}  // namespace ens2
