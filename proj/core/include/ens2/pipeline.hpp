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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ens2/matrix.hpp"
#include "ens2/tabular.hpp"

namespace ens2 {

enum class Stage { kImputer, kEncoder, kScaler, kEstimator };

std::string_view to_string(Stage stage);

// Continuous hyperparameter range, sampled log-uniformly when log_scale.
struct HyperRange {
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
  bool integer = false;
};

// Coarse grid used by template search; random search samples `range` when
// present and falls back to the grid otherwise.
struct HyperDomain {
  std::vector<HyperValue> grid;
  std::optional<HyperRange> range;
};

struct Primitive {
  std::string name;
  Stage stage = Stage::kEstimator;
  std::map<std::string, HyperDomain> hyperparam_space;
};

const std::vector<Primitive>& builtin_primitive_library();

// Throws Error for unknown names.
const Primitive& find_primitive(std::string_view name);

// Unfitted chain imputer -> encoder -> [scaler] -> estimator.
struct CandidatePipeline {
  std::vector<PipelineStep> steps;

  void validate() const;  // throws Error
  std::string describe() const;

  bool operator==(const CandidatePipeline&) const = default;
};

namespace detail {
struct FittedSteps;
}

// Pipeline fitted on a training set. Carries the training schema, the known
// categories and the label vocabulary so it can align raw test data itself.
class FittedPipeline {
 public:
  FittedPipeline();
  ~FittedPipeline();
  FittedPipeline(FittedPipeline&&) noexcept;
  FittedPipeline& operator=(FittedPipeline&&) noexcept;

  // Throws TaskError when a step fails to fit.
  static FittedPipeline fit(const CandidatePipeline& pipeline, const Dataset& train);

  // `data` may have columns in any order; it is aligned to the training schema.
  PredictionMatrix predict_proba(const Dataset& data) const;
  LabelVector predict(const Dataset& data) const;

  const CandidatePipeline& pipeline() const;
  const Schema& schema() const;
  const std::vector<std::string>& label_vocab() const;

  // Self-describing binary artifact: magic "ENS2", format version byte, CBOR body.
  std::string serialize() const;
  static FittedPipeline deserialize(std::string_view bytes);

  static constexpr std::uint8_t kFormatVersion = 1;

 private:
  std::unique_ptr<detail::FittedSteps> impl_;
};

}  // namespace ens2
