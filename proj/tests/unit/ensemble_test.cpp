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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ens2/ensemble.hpp"
#include "ens2/error.hpp"
#include "ens2/rng.hpp"

namespace ens2 {
namespace {

// Count oracle: most votes, ties to the label whose best voter ranks lowest.
std::size_t oracle_vote(const std::vector<LabelVector>& preds, const std::vector<int>& ranks, std::size_t row,
                        std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& p : preds) ++counts[p[row]];
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::size_t best_label = 0;
  int best_rank = 1 << 30;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const std::size_t l = preds[j][row];
    if (counts[l] == top && ranks[j] < best_rank) {
      best_rank = ranks[j];
      best_label = l;
    }
  }
  return best_label;
}

TEST(MajorityVote, StrictMajority) {
  const std::vector<LabelVector> preds{{0}, {0}, {1}};
  const std::vector<int> ranks{1, 2, 3};
  EXPECT_EQ(majority_vote(preds, ranks), (LabelVector{0}));
}

TEST(MajorityVote, ThreeWayTieGoesToBestRank) {
  const std::vector<LabelVector> preds{{0}, {1}, {2}};
  EXPECT_EQ(majority_vote(preds, std::vector<int>{1, 2, 3}), (LabelVector{0}));
  EXPECT_EQ(majority_vote(preds, std::vector<int>{3, 1, 2}), (LabelVector{1}));
}

TEST(MajorityVote, TieBreakUsesBestVoterOfEachTiedLabel) {
  // Labels 0 and 1 tie at two votes; label 1's best voter has rank 1.
  const std::vector<LabelVector> preds{{0}, {1}, {0}, {1}, {2}};
  EXPECT_EQ(majority_vote(preds, std::vector<int>{2, 1, 3, 4, 5}), (LabelVector{1}));
}

TEST(MajorityVote, Errors) {
  const std::vector<LabelVector> preds{{0, 1}, {0}};
  EXPECT_THROW(majority_vote(preds, std::vector<int>{1, 2}), Error);
  EXPECT_THROW(majority_vote(std::vector<LabelVector>{}, std::vector<int>{}), Error);
}

TEST(MajorityVoteProperty, MatchesCountOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t j = 1 + rng.uniform_index(7), c = 2 + rng.uniform_index(4), n = 1 + rng.uniform_index(50);
    std::vector<LabelVector> preds(j, LabelVector(n));
    for (auto& p : preds) {
      for (auto& v : p) v = rng.uniform_index(c);
    }
    std::vector<int> ranks(j);
    std::iota(ranks.begin(), ranks.end(), 1);
    rng.shuffle(std::span<int>(ranks));
    const auto out = majority_vote(preds, ranks);
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(out[i], oracle_vote(preds, ranks, i, c));
  }
}

TEST(MajorityVoteProperty, PermutingMembersWithTheirRanksIsInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t j = 1 + rng.uniform_index(6), n = 30;
    std::vector<LabelVector> preds(j, LabelVector(n));
    for (auto& p : preds) {
      for (auto& v : p) v = rng.uniform_index(3);
    }
    std::vector<int> ranks(j);
    std::iota(ranks.begin(), ranks.end(), 1);
    std::vector<std::size_t> perm(j);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<LabelVector> ppreds;
    std::vector<int> pranks;
    for (auto p : perm) {
      ppreds.push_back(preds[p]);
      pranks.push_back(ranks[p]);
    }
    ASSERT_EQ(majority_vote(preds, ranks), majority_vote(ppreds, pranks));
  }
}

TEST(VoteCommittee, TextRoundTripAndValidation) {
  VoteCommittee c{{{"grid-0003", 1}, {"random-0010", 2}}, 3};
  EXPECT_EQ(c.to_text(), "k 3\ngrid-0003 1\nrandom-0010 2\n");
  EXPECT_EQ(VoteCommittee::from_text(c.to_text()), c);
  VoteCommittee dup{{{"a", 1}, {"b", 1}}, 3};
  EXPECT_THROW(dup.validate(), Error);
  VoteCommittee big{{{"a", 1}, {"b", 2}}, 1};
  EXPECT_THROW(big.validate(), Error);
}

PredictionMatrix one_hot(const LabelVector& y, std::size_t c) {
  PredictionMatrix m(y.size(), c);
  for (std::size_t i = 0; i < y.size(); ++i) m(i, y[i]) = 1.0;
  return m;
}

PredictionMatrix random_probs(Rng& rng, std::size_t n, std::size_t c) {
  PredictionMatrix m(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += (m(i, k) = 0.05 + rng.uniform01());
    for (std::size_t k = 0; k < c; ++k) m(i, k) /= sum;
  }
  return m;
}

TEST(OofDesign, ConcatenatesInRosterOrder) {
  Rng rng(2);
  const std::vector<PredictionMatrix> oof{random_probs(rng, 4, 3), random_probs(rng, 4, 3)};
  const LabelVector y{0, 1, 2, 1};
  const auto d = assemble_oof_design(oof, y, 3);
  ASSERT_EQ(d.features.rows(), 4u);
  ASSERT_EQ(d.features.cols(), 6u);
  EXPECT_EQ(d.features(2, 4), oof[1](2, 1));
  EXPECT_EQ(d.features(3, 0), oof[0](3, 0));
  const auto single = assemble_oof_design(std::span(oof).first(1), y, 3);
  EXPECT_EQ(single.features, oof[0]);
}

TEST(OofDesign, MissingRowIsNamed) {
  Rng rng(2);
  std::vector<PredictionMatrix> oof{random_probs(rng, 4, 2), random_probs(rng, 4, 2)};
  oof[1](2, 0) = std::nan("");
  oof[1](2, 1) = std::nan("");
  try {
    assemble_oof_design(oof, LabelVector{0, 1, 0, 1}, 2);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("learner 1 has no prediction for row 2"), std::string::npos) << e.what();
  }
}

TEST(OofDesign, RejectsCoverageAndVocabularyMismatch) {
  Rng rng(2);
  const std::vector<PredictionMatrix> short_rows{random_probs(rng, 4, 2), random_probs(rng, 3, 2)};
  EXPECT_THROW(assemble_oof_design(short_rows, LabelVector{0, 1, 0, 1}, 2), Error);
  const std::vector<PredictionMatrix> wrong_c{random_probs(rng, 4, 2), random_probs(rng, 4, 3)};
  EXPECT_THROW(assemble_oof_design(wrong_c, LabelVector{0, 1, 0, 1}, 2), Error);
  PredictionMatrix bad(1, 2, 0.6);
  EXPECT_THROW(assemble_oof_design(std::vector<PredictionMatrix>{bad}, LabelVector{0}, 2), Error);
}

StackerModel model_with(Matrix theta, std::size_t learners) {
  StackerModel m;
  m.theta = std::move(theta);
  for (std::size_t j = 0; j < learners; ++j) m.roster.push_back("p" + std::to_string(j));
  for (std::size_t c = 0; c < m.theta.rows(); ++c) m.label_vocab.push_back(std::string(1, char('a' + c)));
  return m;
}

TEST(StackerPredict, ZeroThetaIsUniformAndPicksClassZero) {
  Rng rng(4);
  const auto m = model_with(Matrix(3, 6), 2);
  const std::vector<PredictionMatrix> preds{random_probs(rng, 5, 3), random_probs(rng, 5, 3)};
  const auto out = stacker_predict(m, preds);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out.labels[i], 0u);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.probabilities(i, c), 1.0 / 3.0);
  }
}

TEST(StackerPredict, BinaryWorkedExample) {
  Matrix theta(2, 2);
  theta(1, 0) = 2.0;
  const auto m = model_with(theta, 1);
  PredictionMatrix x(1, 2);
  x(0, 0) = 1.0;
  const auto out = stacker_predict(m, std::vector<PredictionMatrix>{x});
  EXPECT_NEAR(out.probabilities(0, 1), std::exp(2.0) / (1.0 + std::exp(2.0)), 1e-12);
  EXPECT_NEAR(out.probabilities(0, 1), 0.88080, 1e-5);
  EXPECT_EQ(out.labels[0], 1u);
}

TEST(StackerPredict, SingleClassAlwaysPredictsIt) {
  const auto m = model_with(Matrix(1, 2), 2);
  const std::vector<PredictionMatrix> preds{PredictionMatrix(3, 1, 1.0), PredictionMatrix(3, 1, 1.0)};
  const auto out = stacker_predict(m, preds);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.labels[i], 0u);
    EXPECT_EQ(out.probabilities(i, 0), 1.0);
  }
}

TEST(StackerPredict, DimensionMismatchIsAnError) {
  Rng rng(4);
  const auto m = model_with(Matrix(2, 4), 2);
  EXPECT_THROW(stacker_predict(m, std::vector<PredictionMatrix>{random_probs(rng, 2, 2)}), Error);
  EXPECT_THROW(stacker_predict(m, std::vector<PredictionMatrix>{random_probs(rng, 2, 3), random_probs(rng, 2, 3)}),
               Error);
}

TEST(StackerPredictProperty, RowsSumToOneAndShiftInvariant) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t j = 1 + rng.uniform_index(3), c = 2 + rng.uniform_index(3), n = 10;
    Matrix theta(c, j * c);
    for (auto& v : theta.data()) v = 4.0 * (rng.uniform01() - 0.5);
    std::vector<PredictionMatrix> preds;
    for (std::size_t l = 0; l < j; ++l) preds.push_back(random_probs(rng, n, c));
    Matrix shifted = theta;
    for (std::size_t f = 0; f < theta.cols(); ++f) {
      const double delta = 3.0 * (rng.uniform01() - 0.5);
      for (std::size_t k = 0; k < c; ++k) shifted(k, f) += delta;
    }
    const auto a = stacker_predict(model_with(theta, j), preds);
    const auto b = stacker_predict(model_with(shifted, j), preds);
    ASSERT_EQ(a.labels, b.labels);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        sum += a.probabilities(i, k);
        ASSERT_NEAR(a.probabilities(i, k), b.probabilities(i, k), 1e-12);
      }
      ASSERT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(TrainStacker, ZeroEpochsGivesZeroTheta) {
  Rng rng(8);
  const LabelVector y{0, 1, 0, 1};
  const auto d = assemble_oof_design(std::vector<PredictionMatrix>{random_probs(rng, 4, 2)}, y, 2);
  const auto m = train_stacker(d, {.epochs = 0}, {"p0"}, {"a", "b"});
  for (double v : m.theta.data()) EXPECT_EQ(v, 0.0);
}

TEST(TrainStacker, PerfectlyInformativeLearnerIsLearned) {
  Rng rng(12);
  const std::size_t n = 300, c = 3;
  LabelVector y(n);
  for (auto& v : y) v = rng.uniform_index(c);
  const std::vector<PredictionMatrix> oof{one_hot(y, c), random_probs(rng, n, c)};
  const auto d = assemble_oof_design(oof, y, c);
  const auto m = train_stacker(d, {.l2_lambda = 1e-4, .epochs = 500, .step = 0.5}, {"good", "noise"}, {"a", "b", "c"});
  const auto out = stacker_predict(m, oof);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += out.labels[i] == y[i];
  EXPECT_GE(static_cast<double>(hits) / n, 0.99);
}

TEST(TrainStacker, SingleOneHotLearnerReproducesConfidentArgmax) {
  Rng rng(13);
  const std::size_t n = 200, c = 3;
  LabelVector y(n);
  for (auto& v : y) v = rng.uniform_index(c);
  const auto d = assemble_oof_design(std::vector<PredictionMatrix>{one_hot(y, c)}, y, c);
  const auto m = train_stacker(d, {}, {"only"}, {"a", "b", "c"});
  // Confident test inputs: max probability at least 0.9.
  PredictionMatrix test(100, c);
  LabelVector want(100);
  for (std::size_t i = 0; i < 100; ++i) {
    want[i] = rng.uniform_index(c);
    const double top = 0.9 + 0.1 * rng.uniform01();
    for (std::size_t k = 0; k < c; ++k) test(i, k) = k == want[i] ? top : (1.0 - top) / (c - 1);
  }
  EXPECT_EQ(stacker_predict(m, std::vector<PredictionMatrix>{test}).labels, want);
}

TEST(TrainStacker, RequiresAsManyRowsAsClasses) {
  const auto d = assemble_oof_design(std::vector<PredictionMatrix>{one_hot({0, 1}, 3)}, LabelVector{0, 1}, 3);
  EXPECT_THROW(train_stacker(d, {}, {"p"}, {"a", "b", "c"}), Error);
}

TEST(StackerModel, SerializationRoundTripsExactly) {
  Rng rng(21);
  const LabelVector y{0, 1, 2, 1, 0, 2};
  const std::vector<PredictionMatrix> oof{random_probs(rng, 6, 3), random_probs(rng, 6, 3)};
  const auto m = train_stacker(assemble_oof_design(oof, y, 3), {}, {"x", "y"}, {"a", "b", "c"});
  const auto back = StackerModel::deserialize(m.serialize());
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_EQ(back.roster, m.roster);
  EXPECT_EQ(back.label_vocab, m.label_vocab);
  EXPECT_EQ(back.l2_lambda, m.l2_lambda);
  EXPECT_EQ(back.feature_layout, kPerLearnerProbs);
  EXPECT_EQ(back.serialize(), m.serialize());
  EXPECT_THROW(StackerModel::deserialize("{\"format\":\"other\"}"), ParseError);
  EXPECT_THROW(StackerModel::deserialize("not json"), ParseError);
}

}  // namespace
}  // namespace ens2
