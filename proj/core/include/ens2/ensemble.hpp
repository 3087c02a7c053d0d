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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ens2/matrix.hpp"

namespace ens2 {

struct CommitteeMember {
  std::string pipeline_id;
  int cv_rank = 0;

  bool operator==(const CommitteeMember&) const = default;
};

// Voting committee. members.size() <= k and cv_ranks are distinct.
struct VoteCommittee {
  std::vector<CommitteeMember> members;
  std::size_t k = 3;

  void validate() const;  // throws Error

  // "k <k>" followed by one "<pipeline_id> <cv_rank>" line per member.
  std::string to_text() const;
  static VoteCommittee from_text(std::string_view text);

  bool operator==(const VoteCommittee&) const = default;
};

// Per row, the label with the most votes. Among tied labels the one voted by
// the member with the lowest cv_rank wins.
LabelVector majority_vote(std::span<const LabelVector> preds, std::span<const int> cv_ranks);

// Stacker training design: base-learner probability blocks side by side in
// roster order, so features is N x (J * C).
struct OofDesign {
  Matrix features;
  LabelVector labels;
  std::size_t learners = 0;
  std::size_t classes = 0;
};

// Throws Error when a learner has the wrong shape, or names the first row
// whose probabilities are missing or do not sum to 1 within 1e-9.
OofDesign assemble_oof_design(std::span<const PredictionMatrix> oof, std::span<const std::size_t> labels,
                              std::size_t num_classes);

// Test-time features in the same layout. Missing rows are an error.
Matrix stack_features(std::span<const PredictionMatrix> preds, std::size_t num_classes);

inline constexpr std::string_view kPerLearnerProbs = "per_learner_probs";

struct StackerModel {
  Matrix theta;  // classes x (learners * classes)
  std::vector<std::string> roster;
  std::string feature_layout{kPerLearnerProbs};
  double l2_lambda = 1e-3;
  std::vector<std::string> label_vocab;
  double final_loss = 0.0;

  void validate() const;  // throws Error

  // Versioned JSON text; theta is stored row-major.
  std::string serialize() const;
  static StackerModel deserialize(std::string_view text);
};

struct StackerOptions {
  double l2_lambda = 1e-3;
  std::size_t epochs = 500;
  double step = 0.1;
  std::uint64_t seed = 0;
};

// Full-batch gradient descent from theta = 0. The optimizer draws no random
// numbers, so the seed does not affect the result. Throws TaskError when the
// loss diverges and Error when there are fewer rows than classes.
StackerModel train_stacker(const OofDesign& design, const StackerOptions& options,
                           std::vector<std::string> roster, std::vector<std::string> label_vocab);

struct StackerPrediction {
  LabelVector labels;
  PredictionMatrix probabilities;
};

StackerPrediction stacker_predict(const StackerModel& model, std::span<const PredictionMatrix> test_preds);

}  // namespace ens2
