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

#include "ens2/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "components.hpp"
#include "ens2/error.hpp"

namespace ens2 {

using detail::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kImputer: return "imputer";
    case Stage::kEncoder: return "encoder";
    case Stage::kScaler: return "scaler";
    case Stage::kEstimator: return "estimator";
  }
  return "?";
}

const std::vector<Primitive>& builtin_primitive_library() {
  static const std::vector<Primitive> library = [] {
    using V = std::vector<HyperValue>;
    std::vector<Primitive> lib;
    lib.push_back({"impute_mean", Stage::kImputer, {}});
    lib.push_back({"impute_median", Stage::kImputer, {}});
    lib.push_back({"impute_mode", Stage::kImputer, {}});
    lib.push_back({"onehot", Stage::kEncoder, {}});
    lib.push_back({"ordinal", Stage::kEncoder, {}});
    lib.push_back({"standardize", Stage::kScaler, {}});
    lib.push_back({"gaussian_nb",
                   Stage::kEstimator,
                   {{"var_smoothing", {V{1e-9, 1e-3}, HyperRange{1e-10, 1e-1, true, false}}}}});
    lib.push_back({"knn",
                   Stage::kEstimator,
                   {{"k", {V{std::int64_t{1}, std::int64_t{5}, std::int64_t{15}},
                           HyperRange{1, 30, false, true}}}}});
    lib.push_back({"decision_tree",
                   Stage::kEstimator,
                   {{"max_depth", {V{std::int64_t{2}, std::int64_t{4}, std::int64_t{8}},
                                   HyperRange{1, 12, false, true}}},
                    {"min_samples_leaf", {V{std::int64_t{1}, std::int64_t{5}},
                                          HyperRange{1, 20, false, true}}}}});
    lib.push_back({"softmax_linear",
                   Stage::kEstimator,
                   {{"l2", {V{1e-4, 1e-2}, HyperRange{1e-5, 1.0, true, false}}},
                    {"epochs", {V{std::int64_t{200}}, std::nullopt}}}});
    lib.push_back({"majority", Stage::kEstimator, {{"strategy", {V{std::string("most_frequent")}, std::nullopt}}}});
    return lib;
  }();
  return library;
}

const Primitive& find_primitive(std::string_view name) {
  for (const auto& p : builtin_primitive_library()) {
    if (p.name == name) return p;
  }
  throw Error("unknown primitive '" + std::string(name) + "'");
}

void CandidatePipeline::validate() const {
  // Stage order must be imputer, encoder, optional scaler, estimator.
  std::vector<Stage> stages;
  for (const auto& s : steps) stages.push_back(find_primitive(s.primitive).stage);
  const bool with_scaler = stages.size() == 4;
  const bool ok = (stages.size() == 3 || with_scaler) && stages[0] == Stage::kImputer &&
                  stages[1] == Stage::kEncoder &&
                  (!with_scaler || stages[2] == Stage::kScaler) &&
                  stages.back() == Stage::kEstimator;
  if (!ok) {
    throw Error("pipeline must be imputer -> encoder -> [scaler] -> estimator, got " + describe());
  }
}

std::string CandidatePipeline::describe() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out << " -> ";
    out << steps[i].primitive;
    if (!steps[i].hyperparams.empty()) {
      out << '(';
      bool first = true;
      for (const auto& [k, v] : steps[i].hyperparams) {
        if (!first) out << ", ";
        first = false;
        out << k << '=';
        std::visit([&](const auto& x) { out << x; }, v);
      }
      out << ')';
    }
  }
  return out.str();
}

namespace detail {

struct FittedSteps {
  CandidatePipeline pipeline;
  Schema schema;
  CategorySets categories;
  std::vector<std::string> label_vocab;
  Imputer imputer;
  Encoder encoder;
  std::optional<Standardizer> scaler;
  std::unique_ptr<Estimator> estimator;

  Matrix features(const Dataset& aligned) const {
    auto imputed = imputer.transform(aligned.rows());
    Matrix x = encoder.transform(imputed);
    if (scaler) x = scaler->transform(x);
    return x;
  }
};

namespace {

Imputer::Strategy imputer_strategy(const std::string& name) {
  if (name == "impute_mean") return Imputer::Strategy::kMean;
  if (name == "impute_median") return Imputer::Strategy::kMedian;
  return Imputer::Strategy::kMode;
}

json steps_to_json(const CandidatePipeline& p) {
  json steps = json::array();
  for (const auto& s : p.steps) {
    steps.push_back({{"primitive", s.primitive}, {"hyperparams", hyperparams_to_json(s.hyperparams)}});
  }
  return steps;
}

}  // namespace

}  // namespace detail

FittedPipeline::FittedPipeline() = default;
FittedPipeline::~FittedPipeline() = default;
FittedPipeline::FittedPipeline(FittedPipeline&&) noexcept = default;
FittedPipeline& FittedPipeline::operator=(FittedPipeline&&) noexcept = default;

FittedPipeline FittedPipeline::fit(const CandidatePipeline& pipeline, const Dataset& train) {
  pipeline.validate();
  const auto view = split_features_labels(train);
  auto impl = std::make_unique<detail::FittedSteps>();
  impl->pipeline = pipeline;
  impl->schema = train.schema();
  impl->categories = categories_of(train);
  impl->label_vocab = train.label_vocab();

  const auto& steps = pipeline.steps;
  try {
    impl->imputer = detail::Imputer(detail::imputer_strategy(steps[0].primitive));
    impl->imputer.fit(train.schema(), view.features);
    auto imputed = impl->imputer.transform(view.features);

    impl->encoder = detail::Encoder(steps[1].primitive == "onehot" ? detail::Encoder::Kind::kOneHot
                                                                   : detail::Encoder::Kind::kOrdinal);
    impl->encoder.fit(train.schema(), imputed);
    Matrix x = impl->encoder.transform(imputed);

    if (steps.size() == 4) {
      impl->scaler.emplace();
      impl->scaler->fit(x);
      x = impl->scaler->transform(x);
    }
    const auto& est = steps.back();
    impl->estimator = detail::make_estimator(est.primitive, est.hyperparams);
    impl->estimator->fit(x, view.labels, train.num_classes());
  } catch (const TaskError&) {
    throw;
  } catch (const Error& e) {
    throw TaskError(std::string("fit failed: ") + e.what());
  }
  FittedPipeline out;
  out.impl_ = std::move(impl);
  return out;
}

PredictionMatrix FittedPipeline::predict_proba(const Dataset& data) const {
  if (!impl_) throw Error("predict on an empty pipeline");
  const bool already_aligned = data.schema().columns == impl_->schema.columns;
  if (already_aligned) return impl_->estimator->predict_proba(impl_->features(data));
  // Labels of `data` are irrelevant for prediction; drop them before aligning
  // so unseen test labels cannot fail the alignment.
  Dataset unlabeled(Schema{data.schema().columns, std::nullopt}, data.rows(), std::nullopt, {""});
  const Dataset aligned = align_to_schema(impl_->schema, impl_->label_vocab, impl_->categories, unlabeled);
  return impl_->estimator->predict_proba(impl_->features(aligned));
}

LabelVector FittedPipeline::predict(const Dataset& data) const {
  return argmax_rows(predict_proba(data));
}

const CandidatePipeline& FittedPipeline::pipeline() const { return impl_->pipeline; }
const Schema& FittedPipeline::schema() const { return impl_->schema; }
const std::vector<std::string>& FittedPipeline::label_vocab() const { return impl_->label_vocab; }

std::string FittedPipeline::serialize() const {
  if (!impl_) throw Error("serialize on an empty pipeline");
  json cols = json::array();
  for (const auto& c : impl_->schema.columns) {
    cols.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
  }
  json cats = json::array();
  for (const auto& set : impl_->categories) cats.push_back(std::vector<std::string>(set.begin(), set.end()));
  json body = {{"steps", detail::steps_to_json(impl_->pipeline)},
               {"columns", cols},
               {"target", impl_->schema.target ? json(*impl_->schema.target) : json(nullptr)},
               {"categories", cats},
               {"label_vocab", impl_->label_vocab},
               {"imputer", impl_->imputer.to_json()},
               {"encoder", impl_->encoder.to_json()},
               {"scaler", impl_->scaler ? impl_->scaler->to_json() : json(nullptr)},
               {"estimator", impl_->estimator->to_json()}};
  const auto cbor = json::to_cbor(body);
  std::string out = "ENS2";
  out.push_back(static_cast<char>(kFormatVersion));
  out.append(cbor.begin(), cbor.end());
  return out;
}

FittedPipeline FittedPipeline::deserialize(std::string_view bytes) {
  if (bytes.size() < 5 || bytes.substr(0, 4) != "ENS2") throw Error("not a pipeline artifact");
  if (static_cast<std::uint8_t>(bytes[4]) != kFormatVersion) {
    throw Error("unsupported pipeline artifact version " +
                std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(bytes[4]))));
  }
  json body;
  try {
    body = json::from_cbor(bytes.substr(5));
  } catch (const json::exception& e) {
    throw Error(std::string("corrupt pipeline artifact: ") + e.what());
  }
  auto impl = std::make_unique<detail::FittedSteps>();
  try {
    for (const auto& s : body.at("steps")) {
      impl->pipeline.steps.push_back(
          {s.at("primitive").get<std::string>(), detail::hyperparams_from_json(s.at("hyperparams"))});
    }
    for (const auto& c : body.at("columns")) {
      impl->schema.columns.push_back(
          {c.at("name").get<std::string>(), column_kind_from_string(c.at("kind").get<std::string>())});
    }
    if (!body.at("target").is_null()) impl->schema.target = body.at("target").get<std::string>();
    for (const auto& c : body.at("categories")) {
      auto v = c.get<std::vector<std::string>>();
      impl->categories.emplace_back(v.begin(), v.end());
    }
    impl->label_vocab = body.at("label_vocab").get<std::vector<std::string>>();
    impl->imputer = detail::Imputer::from_json(body.at("imputer"));
    impl->encoder = detail::Encoder::from_json(body.at("encoder"));
    if (!body.at("scaler").is_null()) impl->scaler = detail::Standardizer::from_json(body.at("scaler"));
    impl->estimator = detail::estimator_from_json(body.at("estimator"));
  } catch (const json::exception& e) {
    throw Error(std::string("corrupt pipeline artifact: ") + e.what());
  }
  impl->pipeline.validate();
  FittedPipeline out;
  out.impl_ = std::move(impl);
  return out;
}

}  // namespace ens2
