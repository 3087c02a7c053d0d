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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ens2/ensemble.hpp"
#include "ens2/protocol.hpp"
#include "ens2/rng.hpp"
#include "ens2/softmax.hpp"
#include "ens2/stats.hpp"
#include "ens2/tabular.hpp"

namespace ens2 {
namespace {

std::vector<PredictionMatrix> random_oof(Rng& rng, std::size_t learners, std::size_t rows, std::size_t classes) {
  std::vector<PredictionMatrix> out(learners, PredictionMatrix(rows, classes));
  for (auto& m : out) {
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) sum += m(r, c) = 0.05 + rng.uniform01();
      for (std::size_t c = 0; c < classes; ++c) m(r, c) /= sum;
    }
  }
  return out;
}

LabelVector random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  LabelVector y(n);
  for (auto& v : y) v = rng.uniform_index(classes);
  return y;
}

void BM_MajorityVote(benchmark::State& state) {
  Rng rng(1);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto voters = static_cast<std::size_t>(state.range(1));
  std::vector<LabelVector> preds;
  std::vector<int> ranks;
  for (std::size_t j = 0; j < voters; ++j) {
    preds.push_back(random_labels(rng, rows, 5));
    ranks.push_back(static_cast<int>(j + 1));
  }
  for (auto _ : state) benchmark::DoNotOptimize(majority_vote(preds, ranks));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_MajorityVote)->Args({10000, 3})->Args({10000, 7});

void BM_SoftmaxGradient(benchmark::State& state) {
  Rng rng(2);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t classes = 3;
  const auto design = assemble_oof_design(random_oof(rng, 3, rows, classes), random_labels(rng, rows, classes), classes);
  Matrix theta(classes, design.features.cols());
  for (auto& v : theta.data()) v = rng.uniform01() - 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(softmax_gradient(theta, design.features, design.labels, 1e-3));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_SoftmaxGradient)->Arg(1000)->Arg(10000);

void BM_TrainStacker(benchmark::State& state) {
  Rng rng(3);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto design = assemble_oof_design(random_oof(rng, 3, rows, 2), random_labels(rng, rows, 2), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_stacker(design, StackerOptions{}, {"a", "b", "c"}, {"x", "y"}));
  }
}
BENCHMARK(BM_TrainStacker)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_WilcoxonExact(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform01();
    y[i] = rng.uniform01();
  }
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_signed_rank(x, y));
}
BENCHMARK(BM_WilcoxonExact)->Arg(12)->Arg(20)->Arg(50);

void BM_StratifiedKfold(benchmark::State& state) {
  Rng rng(5);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const LabelVector y = random_labels(rng, rows, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kfold(rows, 3, std::span<const std::size_t>(y), 7));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_StratifiedKfold)->Arg(20000);

void BM_ParseCsv(benchmark::State& state) {
  Rng rng(6);
  std::string csv = "a,b,c,label\n";
  for (int i = 0; i < 5000; ++i) {
    csv += std::to_string(rng.uniform01()) + "," + std::to_string(rng.uniform01()) + "," +
           (rng.bernoulli(0.5) ? "red" : "blue") + "," + (rng.bernoulli(0.5) ? "yes" : "no") + "\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(parse_csv(csv, std::string("label")));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(csv.size()));
}
BENCHMARK(BM_ParseCsv)->Unit(benchmark::kMillisecond);

void BM_EnvelopeRoundTrip(benchmark::State& state) {
  PipelineRecord r;
  r.id = "grid-0007";
  r.searcher_id = "grid";
  r.steps = {{"impute_mean", {}}, {"knn", {{"k", std::int64_t{15}}}}};
  r.validation_score = 0.8125;
  r.has_oof = true;
  const protocol::Envelope e{protocol::kVersion, "run-0001", protocol::SearchProgress{r}};
  for (auto _ : state) benchmark::DoNotOptimize(protocol::decode(protocol::encode(e)));
}
BENCHMARK(BM_EnvelopeRoundTrip);

}  // namespace
}  // namespace ens2

BENCHMARK_MAIN();
