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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ens2/matrix.hpp"

namespace ens2 {

enum class ColumnKind { kNumeric, kCategorical };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;

  bool operator==(const Column&) const = default;
};

// Feature columns in file order plus the (optional) target column name.
// The target is not part of `columns`; its values live in Dataset::labels.
struct Schema {
  std::vector<Column> columns;
  std::optional<std::string> target;

  // Throws ParseError unless names are unique, there is at least one
  // feature column and the target does not shadow a feature.
  void validate() const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const Schema&) const = default;
};

// Categorical value substituted for categories never seen at training time.
inline constexpr std::string_view kUnknownCategory = "__UNKNOWN__";

// Missing (std::monostate), numeric, or categorical cell.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

// Immutable typed tabular data. Rows hold feature cells only, in schema order.
class Dataset {
 public:
  Dataset() = default;
  // Validates every invariant; throws ParseError on violation.
  Dataset(Schema schema, std::vector<std::vector<Cell>> rows,
          std::optional<LabelVector> labels, std::vector<std::string> label_vocab);

  const Schema& schema() const noexcept { return schema_; }
  const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }
  const std::optional<LabelVector>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& label_vocab() const noexcept { return label_vocab_; }

  std::size_t num_rows() const noexcept { return rows_.size(); }
  std::size_t num_features() const noexcept { return schema_.columns.size(); }
  std::size_t num_classes() const noexcept { return label_vocab_.size(); }
  bool has_labels() const noexcept { return labels_.has_value(); }

  // Row subset in the given order, labels carried along.
  Dataset subset(const std::vector<std::size_t>& row_indices) const;

 private:
  Schema schema_;
  std::vector<std::vector<Cell>> rows_;
  std::optional<LabelVector> labels_;
  std::vector<std::string> label_vocab_;
};

// Borrowed view of a labeled dataset; valid while the dataset lives.
struct FeatureLabelView {
  std::span<const std::vector<Cell>> features;
  std::span<const std::size_t> labels;
};

enum class Metric { kAccuracy, kLogloss };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct TaskSpec {
  Metric metric = Metric::kAccuracy;
  std::string target;
  double time_budget_s = 60.0;
  double refit_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error
};

using HyperValue = std::variant<std::int64_t, double, std::string>;
using HyperParams = std::map<std::string, HyperValue>;

struct PipelineStep {
  std::string primitive;
  HyperParams hyperparams;

  bool operator==(const PipelineStep&) const = default;
};

// A pipeline discovered by a searcher.
struct PipelineRecord {
  std::string id;
  std::string searcher_id;
  std::vector<PipelineStep> steps;
  double validation_score = 0.0;  // higher is better
  std::string artifact_ref;       // empty until the pipeline is refit
  bool has_oof = false;
  std::uint64_t discovered_at = 0;

  void validate() const;  // throws Error

  bool operator==(const PipelineRecord&) const = default;
};

// RFC 4180 CSV (header row required, empty cell = missing). When `target`
// is set it is removed from the features and encoded into labels with a
// sorted vocabulary.
Dataset parse_csv(std::string_view bytes, const std::optional<std::string>& target);
Dataset read_csv_file(const std::string& path, const std::optional<std::string>& target);

// Inverse of parse_csv: features in schema order followed by the target.
std::string to_csv(const Dataset& d);

// Throws Error when the dataset is unlabeled.
FeatureLabelView split_features_labels(const Dataset& d);

// Distinct categorical values per feature column (empty for numeric columns).
using CategorySets = std::vector<std::set<std::string>>;
CategorySets categories_of(const Dataset& d);

// Reorders test columns to `schema`, coerces cells to its column kinds, maps
// categories outside `known` to kUnknownCategory and re-encodes labels
// against `label_vocab`. Throws ParseError listing any missing columns.
Dataset align_to_schema(const Schema& schema, const std::vector<std::string>& label_vocab,
                        const CategorySets& known, const Dataset& test);

// align_to_schema against a training dataset. Reorders test columns to the train schema, coerces cells to the train
// column kinds, maps unseen categories to kUnknownCategory and re-encodes
// test labels against the train vocabulary.
Dataset align_test(const Dataset& train, const Dataset& test);

// Manifest (schema + vocabulary) cached next to a dataset CSV as JSON.
std::string manifest_json(const Dataset& d);
void write_manifest(const Dataset& d, const std::string& path);

}  // namespace ens2
