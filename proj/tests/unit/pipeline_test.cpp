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

#include <cmath>
#include <set>

#include "ens2/artifacts.hpp"
#include "ens2/error.hpp"
#include "ens2/pipeline.hpp"
#include "ens2/search.hpp"
#include "ens2/stats.hpp"
#include "test_support.hpp"

namespace ens2 {
namespace {

CandidatePipeline chain(const std::string& estimator, HyperParams hp = {}, bool scale = false,
                        const std::string& encoder = "onehot") {
  CandidatePipeline c;
  c.steps.push_back({"impute_median", {}});
  c.steps.push_back({encoder, {}});
  if (scale) c.steps.push_back({"standardize", {}});
  c.steps.push_back({estimator, std::move(hp)});
  return c;
}

TEST(PrimitiveLibrary, CoversEveryStage) {
  std::set<std::string> names;
  std::size_t estimators = 0;
  for (const auto& p : builtin_primitive_library()) {
    names.insert(p.name);
    if (p.stage == Stage::kEstimator) {
      ++estimators;
      EXPECT_FALSE(p.hyperparam_space.empty()) << p.name;
    }
  }
  EXPECT_GE(estimators, 4u);
  for (const char* n : {"impute_mean", "impute_median", "impute_mode", "onehot", "ordinal", "standardize",
                        "gaussian_nb", "knn", "decision_tree", "softmax_linear"}) {
    EXPECT_TRUE(names.contains(n)) << n;
  }
  EXPECT_THROW(find_primitive("svm"), Error);
}

TEST(CandidatePipeline, StageOrderIsEnforced) {
  EXPECT_NO_THROW(chain("knn", {{"k", std::int64_t{3}}}).validate());
  CandidatePipeline no_encoder{{{"impute_mean", {}}, {"knn", {}}}};
  EXPECT_THROW(no_encoder.validate(), Error);
  CandidatePipeline reversed{{{"onehot", {}}, {"impute_mean", {}}, {"knn", {}}}};
  EXPECT_THROW(reversed.validate(), Error);
  CandidatePipeline two_estimators{{{"impute_mean", {}}, {"onehot", {}}, {"knn", {}}, {"gaussian_nb", {}}}};
  EXPECT_THROW(two_estimators.validate(), Error);
}

TEST(DecisionTree, DepthOneSeparatesThresholdData) {
  const Dataset d = parse_csv("x,y\n0.1,lo\n0.3,lo\n0.4,lo\n0.6,hi\n0.8,hi\n0.9,hi\n", std::string("y"));
  const auto model = FittedPipeline::fit(
      chain("decision_tree", {{"max_depth", std::int64_t{1}}, {"min_samples_leaf", std::int64_t{1}}}), d);
  EXPECT_EQ(accuracy(model.predict(d), *d.labels()), 1.0);
}

TEST(Estimators, EachLearnsSeparableBlobs) {
  const Dataset train = testing::blobs(200, 3, 1, 4.0);
  const Dataset test = testing::blobs(200, 3, 2, 4.0);
  const std::vector<CandidatePipeline> pipelines{
      chain("gaussian_nb", {{"var_smoothing", 1e-9}}),
      chain("knn", {{"k", std::int64_t{5}}}, true),
      chain("decision_tree", {{"max_depth", std::int64_t{4}}, {"min_samples_leaf", std::int64_t{1}}}),
      chain("softmax_linear", {{"l2", 1e-4}, {"epochs", std::int64_t{200}}}, true),
  };
  for (const auto& p : pipelines) {
    const auto model = FittedPipeline::fit(p, train);
    const auto probs = model.predict_proba(test);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < probs.cols(); ++c) sum += probs(i, c);
      ASSERT_NEAR(sum, 1.0, 1e-9) << p.describe();
    }
    EXPECT_GE(accuracy(argmax_rows(probs), *test.labels()), 0.9) << p.describe();
  }
}

TEST(Estimators, HandleMissingAndUnseenCategories) {
  const Dataset train = read_csv_file(testing::demo("noisy_cat_train.csv"), std::string("label"));
  const Dataset test = read_csv_file(testing::demo("noisy_cat_test.csv"), std::string("label"));
  for (const auto& enc : {"onehot", "ordinal"}) {
    const auto model = FittedPipeline::fit(chain("gaussian_nb", {{"var_smoothing", 1e-9}}, false, enc), train);
    const auto probs = model.predict_proba(test);
    ASSERT_EQ(probs.rows(), test.num_rows());
    for (double v : probs.data()) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(MajorityDummy, StratifiedCvScoresOneHalf) {
  const Dataset d = parse_csv("x,y\n1,a\n2,a\n3,a\n4,b\n5,b\n6,b\n", std::string("y"));
  const auto folds = kfold(6, 3, std::span<const std::size_t>(*d.labels()), 0);
  std::vector<std::size_t> train_sizes;
  const auto cv = cv_evaluate(chain("majority", {{"strategy", std::string("most_frequent")}}), d, folds,
                              Metric::kAccuracy,
                              [&](std::size_t, std::span<const std::size_t> tr, std::span<const std::size_t>) {
                                train_sizes.push_back(tr.size());
                              });
  EXPECT_DOUBLE_EQ(cv.mean_score, 0.5);
  EXPECT_EQ(train_sizes, (std::vector<std::size_t>{4, 4, 4}));
  // Constant predictor: every OOF row holds the same distribution.
  for (std::size_t i = 1; i < 6; ++i) {
    EXPECT_EQ(cv.oof(i, 0), cv.oof(0, 0));
    EXPECT_EQ(cv.oof(i, 1), cv.oof(0, 1));
  }
  EXPECT_EQ(argmax_rows(cv.oof), (LabelVector(6, 0)));
}

TEST(FittedPipeline, SerializationRoundTripsPredictions) {
  const Dataset train = read_csv_file(testing::demo("noisy_cat_train.csv"), std::string("label"));
  const Dataset test = read_csv_file(testing::demo("noisy_cat_test.csv"), std::nullopt);
  for (const auto& p : {chain("decision_tree", {{"max_depth", std::int64_t{4}}, {"min_samples_leaf", std::int64_t{5}}}),
                        chain("knn", {{"k", std::int64_t{5}}}, true),
                        chain("softmax_linear", {{"l2", 1e-2}, {"epochs", std::int64_t{200}}}, true, "ordinal")}) {
    const auto model = FittedPipeline::fit(p, train);
    const std::string bytes = model.serialize();
    EXPECT_EQ(bytes.substr(0, 4), "ENS2");
    EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), FittedPipeline::kFormatVersion);
    const auto back = FittedPipeline::deserialize(bytes);
    EXPECT_EQ(back.predict_proba(test), model.predict_proba(test)) << p.describe();
    EXPECT_EQ(back.pipeline(), p);
  }
  EXPECT_THROW(FittedPipeline::deserialize("nope!"), Error);
  std::string bad_version = FittedPipeline::fit(chain("knn", {{"k", std::int64_t{1}}}), train).serialize();
  bad_version[4] = 99;
  EXPECT_THROW(FittedPipeline::deserialize(bad_version), Error);
}

TEST(Refit, ArtifactReloadsAndIsDeterministic) {
  testing::TempDir dir;
  const ArtifactStore store(dir.path());
  const Dataset train = read_csv_file(testing::demo("linear_train.csv"), std::string("label"));
  const auto p = chain("softmax_linear", {{"l2", 1e-3}, {"epochs", std::int64_t{200}}}, true);
  const std::string ref = refit(p, train, store, "grid-0001");
  EXPECT_EQ(ref, ArtifactStore::model_ref("grid-0001"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / ref));
  const auto loaded = store.load_model("grid-0001");
  EXPECT_EQ(loaded.predict_proba(train), FittedPipeline::fit(p, train).predict_proba(train));
}

TEST(Refit, SingleClassDatasetAlwaysPredictsIt) {
  const Dataset d = parse_csv("x,y\n1,only\n2,only\n3,only\n", std::string("y"));
  const auto model = FittedPipeline::fit(chain("knn", {{"k", std::int64_t{1}}}), d);
  const Dataset probe = parse_csv("x\n-5\n100\n", std::nullopt);
  EXPECT_EQ(model.predict(probe), (LabelVector{0, 0}));
}

}  // namespace
}  // namespace ens2
