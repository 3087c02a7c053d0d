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

#include "ens2/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ens2/error.hpp"
#include "ens2/softmax.hpp"
#include "json.hpp"

namespace ens2 {

using nlohmann::json;

namespace {

constexpr int kStackerFormatVersion = 1;
constexpr double kRowSumTolerance = 1e-9;

}  // namespace

void VoteCommittee::validate() const {
  if (members.size() > k) throw Error("committee has more members than k");
  std::set<int> ranks;
  for (const auto& m : members) {
    if (m.pipeline_id.empty()) throw Error("committee member without pipeline id");
    if (!ranks.insert(m.cv_rank).second) throw Error("committee cv_ranks must be distinct");
  }
}

std::string VoteCommittee::to_text() const {
  validate();
  std::ostringstream out;
  out << "k " << k << "\n";
  for (const auto& m : members) out << m.pipeline_id << " " << m.cv_rank << "\n";
  return out.str();
}

VoteCommittee VoteCommittee::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  VoteCommittee c;
  if (!(in >> tag >> c.k) || tag != "k") throw ParseError("committee: missing k line");
  CommitteeMember m;
  while (in >> m.pipeline_id) {
    if (!(in >> m.cv_rank)) throw ParseError("committee: member without rank");
    c.members.push_back(m);
  }
  c.validate();
  return c;
}

LabelVector majority_vote(std::span<const LabelVector> preds, std::span<const int> cv_ranks) {
  if (preds.empty()) throw Error("majority_vote needs at least one member");
  if (cv_ranks.size() != preds.size()) throw Error("majority_vote: one cv_rank per member required");
  const std::size_t n = preds[0].size();
  for (const auto& p : preds) {
    if (p.size() != n) throw Error("majority_vote: prediction length mismatch");
  }

  // Per row: (label, votes, best voter rank) for each label that received a vote.
  struct Tally {
    std::size_t label;
    std::size_t votes;
    int best_rank;
  };
  LabelVector out(n);
  std::vector<Tally> tally;
  for (std::size_t i = 0; i < n; ++i) {
    tally.clear();
    for (std::size_t j = 0; j < preds.size(); ++j) {
      const std::size_t label = preds[j][i];
      auto it = std::find_if(tally.begin(), tally.end(), [&](const Tally& t) { return t.label == label; });
      if (it == tally.end()) {
        tally.push_back({label, 1, cv_ranks[j]});
      } else {
        ++it->votes;
        it->best_rank = std::min(it->best_rank, cv_ranks[j]);
      }
    }
    const Tally* best = &tally[0];
    for (const auto& t : tally) {
      if (t.votes > best->votes || (t.votes == best->votes && t.best_rank < best->best_rank)) best = &t;
    }
    out[i] = best->label;
  }
  return out;
}

namespace {

Matrix concat_blocks(std::span<const PredictionMatrix> blocks, std::size_t num_classes, const char* what) {
  if (blocks.empty()) throw Error(std::string(what) + ": no base learners");
  if (num_classes == 0) throw Error(std::string(what) + ": no classes");
  const std::size_t n = blocks[0].rows();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (blocks[j].cols() != num_classes) {
      throw Error(std::string(what) + ": learner " + std::to_string(j) + " has " +
                  std::to_string(blocks[j].cols()) + " classes, expected " + std::to_string(num_classes));
    }
    if (blocks[j].rows() != n) {
      throw Error(std::string(what) + ": learner " + std::to_string(j) + " covers " +
                  std::to_string(blocks[j].rows()) + " rows, expected " + std::to_string(n));
    }
  }
  Matrix out(n, blocks.size() * num_classes);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      bool finite = true;
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double p = blocks[j](i, c);
        finite = finite && std::isfinite(p);
        sum += p;
        out(i, j * num_classes + c) = p;
      }
      if (!finite) {
        throw Error(std::string(what) + ": learner " + std::to_string(j) + " has no prediction for row " +
                    std::to_string(i));
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw Error(std::string(what) + ": learner " + std::to_string(j) + " row " + std::to_string(i) +
                    " probabilities do not sum to 1");
      }
    }
  }
  return out;
}

}  // namespace

OofDesign assemble_oof_design(std::span<const PredictionMatrix> oof, std::span<const std::size_t> labels,
                              std::size_t num_classes) {
  OofDesign d;
  d.features = concat_blocks(oof, num_classes, "oof design");
  if (labels.size() != d.features.rows()) throw Error("oof design: label count does not match rows");
  for (std::size_t y : labels) {
    if (y >= num_classes) throw Error("oof design: label out of range");
  }
  d.labels.assign(labels.begin(), labels.end());
  d.learners = oof.size();
  d.classes = num_classes;
  return d;
}

Matrix stack_features(std::span<const PredictionMatrix> preds, std::size_t num_classes) {
  return concat_blocks(preds, num_classes, "stacker input");
}

void StackerModel::validate() const {
  if (feature_layout != kPerLearnerProbs) throw Error("unsupported stacker layout '" + feature_layout + "'");
  if (roster.empty()) throw Error("stacker roster is empty");
  if (label_vocab.empty()) throw Error("stacker label vocabulary is empty");
  if (l2_lambda < 0.0 || !std::isfinite(l2_lambda)) throw Error("stacker l2_lambda must be >= 0");
  const std::size_t c = label_vocab.size();
  if (theta.rows() != c || theta.cols() != roster.size() * c) throw Error("stacker theta has wrong shape");
  for (double v : theta.data()) {
    if (!std::isfinite(v)) throw Error("stacker theta is not finite");
  }
}

std::string StackerModel::serialize() const {
  validate();
  json j;
  j["format"] = "ens2-stacker";
  j["version"] = kStackerFormatVersion;
  j["feature_layout"] = feature_layout;
  j["roster"] = roster;
  j["label_vocab"] = label_vocab;
  j["l2_lambda"] = l2_lambda;
  j["final_loss"] = final_loss;
  j["theta_rows"] = theta.rows();
  j["theta_cols"] = theta.cols();
  j["theta"] = theta.data();
  return j.dump(2) + "\n";
}

StackerModel StackerModel::deserialize(std::string_view text) {
  StackerModel m;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "ens2-stacker") throw ParseError("not a stacker artifact");
    if (j.at("version").get<int>() != kStackerFormatVersion) throw ParseError("unsupported stacker version");
    m.feature_layout = j.at("feature_layout").get<std::string>();
    m.roster = j.at("roster").get<std::vector<std::string>>();
    m.label_vocab = j.at("label_vocab").get<std::vector<std::string>>();
    m.l2_lambda = j.at("l2_lambda").get<double>();
    m.final_loss = j.at("final_loss").get<double>();
    const auto rows = j.at("theta_rows").get<std::size_t>();
    const auto cols = j.at("theta_cols").get<std::size_t>();
    const auto values = j.at("theta").get<std::vector<double>>();
    if (values.size() != rows * cols) throw ParseError("stacker theta size mismatch");
    m.theta = Matrix(rows, cols);
    std::copy(values.begin(), values.end(), m.theta.data().begin());
  } catch (const json::exception& e) {
    throw ParseError(std::string("stacker artifact: ") + e.what());
  }
  m.validate();
  return m;
}

StackerModel train_stacker(const OofDesign& design, const StackerOptions& options,
                           std::vector<std::string> roster, std::vector<std::string> label_vocab) {
  if (design.classes == 0 || design.learners == 0) throw Error("stacker design is empty");
  if (design.features.cols() != design.learners * design.classes) throw Error("stacker design has wrong width");
  if (design.features.rows() < design.classes) throw Error("stacker needs at least as many rows as classes");
  if (roster.size() != design.learners) throw Error("stacker roster does not match design");
  if (label_vocab.size() != design.classes) throw Error("stacker vocabulary does not match design");
  if (options.l2_lambda < 0.0) throw Error("stacker l2_lambda must be >= 0");

  SoftmaxTrainOptions opts;
  opts.l2_lambda = options.l2_lambda;
  opts.epochs = options.epochs;
  opts.step = options.step;
  SoftmaxFit fit = train_softmax(design.features, design.labels, design.classes, opts);

  StackerModel m;
  m.theta = std::move(fit.theta);
  m.roster = std::move(roster);
  m.l2_lambda = options.l2_lambda;
  m.label_vocab = std::move(label_vocab);
  m.final_loss = fit.final_loss;
  return m;
}

StackerPrediction stacker_predict(const StackerModel& model, std::span<const PredictionMatrix> test_preds) {
  const std::size_t c = model.theta.rows();
  if (test_preds.size() != model.roster.size()) throw Error("stacker input: roster size mismatch");
  const Matrix x = stack_features(test_preds, c);
  if (x.cols() != model.theta.cols()) throw Error("stacker input: feature dimension mismatch");
  StackerPrediction out;
  out.probabilities = softmax_predict_proba(model.theta, x);
  out.labels = argmax_rows(out.probabilities);
  return out;
}

}  // namespace ens2
