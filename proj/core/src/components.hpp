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

// Fitted pipeline steps. Internal to the core library.

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ens2/matrix.hpp"
#include "ens2/tabular.hpp"
#include "json.hpp"

namespace ens2::detail {

using json = nlohmann::json;

std::int64_t hyper_int(const HyperParams& hp, const std::string& name, std::int64_t fallback);
double hyper_double(const HyperParams& hp, const std::string& name, double fallback);
std::string hyper_string(const HyperParams& hp, const std::string& name, std::string fallback);

json hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const json& j);

using CellRows = std::vector<std::vector<Cell>>;

class Imputer {
 public:
  enum class Strategy { kMean, kMedian, kMode };

  explicit Imputer(Strategy strategy = Strategy::kMean) : strategy_(strategy) {}

  void fit(const Schema& schema, std::span<const std::vector<Cell>> rows);
  CellRows transform(std::span<const std::vector<Cell>> rows) const;

  json to_json() const;
  static Imputer from_json(const json& j);

 private:
  Strategy strategy_;
  std::vector<Cell> fill_;
};

class Encoder {
 public:
  enum class Kind { kOneHot, kOrdinal };

  explicit Encoder(Kind kind = Kind::kOneHot) : kind_(kind) {}

  void fit(const Schema& schema, std::span<const std::vector<Cell>> rows);
  // Rows must be imputed (no missing cells).
  Matrix transform(std::span<const std::vector<Cell>> rows) const;
  std::size_t output_width() const;

  json to_json() const;
  static Encoder from_json(const json& j);

 private:
  Kind kind_;
  std::vector<bool> categorical_;
  std::vector<std::vector<std::string>> categories_;  // sorted, per column
};

class Standardizer {
 public:
  void fit(const Matrix& x);
  Matrix transform(const Matrix& x) const;

  json to_json() const;
  static Standardizer from_json(const json& j);

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  // labels index into [0, num_classes); classes may be absent from `labels`.
  virtual void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) = 0;
  virtual PredictionMatrix predict_proba(const Matrix& x) const = 0;
  virtual json to_json() const = 0;
};

std::unique_ptr<Estimator> make_estimator(const std::string& name, const HyperParams& hp);
std::unique_ptr<Estimator> estimator_from_json(const json& j);

}  // namespace ens2::detail
