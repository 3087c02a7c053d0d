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

#include "ens2/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ens2/error.hpp"

namespace ens2 {

std::string_view to_string(SearcherKind kind) {
  switch (kind) {
    case SearcherKind::kGridTemplate: return "grid";
    case SearcherKind::kRandom: return "random";
    case SearcherKind::kSuccessiveHalving: return "halving";
  }
  return "?";
}

SearcherKind searcher_kind_from_string(std::string_view s) {
  if (s == "grid") return SearcherKind::kGridTemplate;
  if (s == "random") return SearcherKind::kRandom;
  if (s == "halving") return SearcherKind::kSuccessiveHalving;
  throw Error("unknown searcher kind '" + std::string(s) + "'");
}

std::string_view to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::kComplete: return "complete";
    case SearchStatus::kBudgetExhausted: return "budget_exhausted";
    case SearchStatus::kFailed: return "failed";
  }
  return "?";
}

SearchStatus search_status_from_string(std::string_view s) {
  if (s == "complete") return SearchStatus::kComplete;
  if (s == "budget_exhausted") return SearchStatus::kBudgetExhausted;
  if (s == "failed") return SearchStatus::kFailed;
  throw Error("unknown search status '" + std::string(s) + "'");
}

bool SearchControl::expired() const {
  if (stop_requested && stop_requested()) return true;
  return Clock::now() >= deadline;
}

double validation_score(Metric metric, const PredictionMatrix& probs, std::span<const std::size_t> truth) {
  if (metric == Metric::kAccuracy) return accuracy(argmax_rows(probs), truth);
  return std::exp(-logloss(probs, truth));
}

CvResult cv_evaluate(const CandidatePipeline& pipeline, const Dataset& data, const FoldAssignment& folds,
                     Metric metric, const FoldObserver& observer) {
  if (folds.assignment.size() != data.num_rows()) throw Error("cv: folds do not match dataset");
  const auto& labels = *data.labels();
  CvResult result;
  result.oof = PredictionMatrix(data.num_rows(), data.num_classes());
  double total = 0.0;
  for (std::size_t fold = 0; fold < folds.k; ++fold) {
    const auto train_rows = folds.rows_not_in(fold);
    const auto predict_rows = folds.rows_in(fold);
    if (observer) observer(fold, train_rows, predict_rows);
    const auto model = FittedPipeline::fit(pipeline, data.subset(train_rows));
    const auto probs = model.predict_proba(data.subset(predict_rows));
    std::vector<std::size_t> truth;
    truth.reserve(predict_rows.size());
    for (std::size_t i = 0; i < predict_rows.size(); ++i) {
      truth.push_back(labels[predict_rows[i]]);
      auto dst = result.oof.row(predict_rows[i]);
      auto src = probs.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    total += validation_score(metric, probs, truth);
  }
  result.mean_score = total / static_cast<double>(folds.k);
  return result;
}

namespace {

// Searchable estimators; `majority` is a baseline and stays out of searches.
const std::vector<std::string>& search_estimators() {
  static const std::vector<std::string> names{"gaussian_nb", "knn", "decision_tree", "softmax_linear"};
  return names;
}

std::vector<HyperParams> grid_of(const Primitive& p) {
  std::vector<HyperParams> out{HyperParams{}};
  for (const auto& [name, domain] : p.hyperparam_space) {
    std::vector<HyperParams> next;
    for (const auto& partial : out) {
      for (const auto& v : domain.grid) {
        auto hp = partial;
        hp[name] = v;
        next.push_back(std::move(hp));
      }
    }
    out = std::move(next);
  }
  return out;
}

HyperValue sample_value(const HyperDomain& domain, Rng& rng) {
  if (domain.range) {
    const auto& r = *domain.range;
    if (r.integer) {
      const auto lo = static_cast<std::int64_t>(r.lo), hi = static_cast<std::int64_t>(r.hi);
      return lo + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    const double u = rng.uniform01();
    if (r.log_scale) return std::exp(std::log(r.lo) + u * (std::log(r.hi) - std::log(r.lo)));
    return r.lo + u * (r.hi - r.lo);
  }
  return domain.grid[rng.uniform_index(domain.grid.size())];
}

struct Evaluator {
  const Dataset& data;
  const TaskSpec& spec;
  const SearchControl& control;
  FoldAssignment folds;
  SearchReport report;
  Clock::time_point start = Clock::now();

  Evaluator(const Dataset& d, const TaskSpec& s, const SearchControl& c)
      : data(d), spec(s), control(c) {
    if (!d.has_labels()) throw Error("search requires a labeled dataset");
    folds = kfold(d.num_rows(), kSearchFolds, std::span<const std::size_t>(*d.labels()), derive_seed(s.seed, 1));
  }

  std::string searcher_id() const { return control.searcher_id.empty() ? "searcher" : control.searcher_id; }

  void emit(PipelineRecord record, std::optional<PredictionMatrix> oof) {
    record.id = pipeline_id_for(searcher_id(), report.pipelines.size());
    record.searcher_id = searcher_id();
    record.discovered_at = report.pipelines.size();
    record.has_oof = oof.has_value();
    if (control.on_candidate) control.on_candidate(record, oof ? &*oof : nullptr);
    report.pipelines.push_back(std::move(record));
    report.oof.push_back(std::move(oof));
  }

  // Returns false when the candidate failed.
  bool evaluate_cv(const CandidatePipeline& candidate) {
    try {
      auto cv = cv_evaluate(candidate, data, folds, spec.metric, control.fold_observer);
      PipelineRecord rec;
      rec.steps = candidate.steps;
      rec.validation_score = cv.mean_score;
      emit(std::move(rec), std::move(cv.oof));
      return true;
    } catch (const TaskError&) {
      report.failed_candidates += 1;
      return false;
    }
  }

  SearchReport finish(bool exhausted) {
    report.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
    if (report.pipelines.empty()) {
      report.status = SearchStatus::kFailed;
      report.reason = exhausted || report.failed_candidates == 0 ? "budget too small"
                                                                 : "every candidate failed";
    } else {
      report.status = exhausted ? SearchStatus::kBudgetExhausted : SearchStatus::kComplete;
    }
    return std::move(report);
  }
};

}  // namespace

std::vector<CandidatePipeline> grid_template_candidates() {
  // Preprocessing templates, cycled in this order against every estimator grid.
  const std::vector<std::vector<std::string>> templates{
      {"impute_median", "onehot", "standardize"},
      {"impute_mean", "ordinal"},
  };
  std::vector<CandidatePipeline> out;
  for (const auto& tmpl : templates) {
    for (const auto& est : search_estimators()) {
      for (const auto& hp : grid_of(find_primitive(est))) {
        CandidatePipeline c;
        for (const auto& step : tmpl) c.steps.push_back({step, {}});
        c.steps.push_back({est, hp});
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

CandidatePipeline sample_candidate(Rng& rng) {
  static const std::vector<std::string> imputers{"impute_mean", "impute_median", "impute_mode"};
  static const std::vector<std::string> encoders{"onehot", "ordinal"};
  CandidatePipeline c;
  c.steps.push_back({imputers[rng.uniform_index(imputers.size())], {}});
  c.steps.push_back({encoders[rng.uniform_index(encoders.size())], {}});
  if (rng.bernoulli(0.5)) c.steps.push_back({"standardize", {}});
  const auto& est = search_estimators()[rng.uniform_index(search_estimators().size())];
  HyperParams hp;
  for (const auto& [name, domain] : find_primitive(est).hyperparam_space) hp[name] = sample_value(domain, rng);
  c.steps.push_back({est, std::move(hp)});
  return c;
}

SearchReport grid_template_search(const Dataset& data, const TaskSpec& spec, const SearchControl& control) {
  Evaluator ev(data, spec, control);
  for (const auto& candidate : grid_template_candidates()) {
    if (control.expired()) return ev.finish(true);
    ev.evaluate_cv(candidate);
  }
  return ev.finish(false);
}

SearchReport random_search(const Dataset& data, const TaskSpec& spec, const SearchControl& control) {
  Evaluator ev(data, spec, control);
  Rng rng(derive_seed(spec.seed, 10));
  for (std::size_t i = 0; i < control.random_candidates; ++i) {
    const auto candidate = sample_candidate(rng);
    if (control.expired()) return ev.finish(true);
    ev.evaluate_cv(candidate);
  }
  return ev.finish(false);
}

SearchReport successive_halving_search(const Dataset& data, const TaskSpec& spec,
                                       const SearchControl& control) {
  Evaluator ev(data, spec, control);
  const auto& labels = *data.labels();

  // Stratified one-third holdout; rung training sets are growing prefixes of
  // a shuffled pool of the remaining rows.
  const auto split = kfold(data.num_rows(), 3, std::span<const std::size_t>(labels), derive_seed(spec.seed, 2));
  const auto holdout_rows = split.rows_in(0);
  auto pool = split.rows_not_in(0);
  Rng pool_rng(derive_seed(spec.seed, 3));
  pool_rng.shuffle(std::span<std::size_t>(pool));
  const Dataset holdout = data.subset(holdout_rows);
  std::vector<std::size_t> holdout_truth;
  for (auto r : holdout_rows) holdout_truth.push_back(labels[r]);

  Rng rng(derive_seed(spec.seed, 20));
  std::vector<CandidatePipeline> cohort;
  for (std::size_t i = 0; i < std::max<std::size_t>(control.halving_cohort, 1); ++i) {
    cohort.push_back(sample_candidate(rng));
  }

  std::vector<std::optional<double>> last_score(cohort.size());
  std::vector<std::size_t> alive(cohort.size());
  std::iota(alive.begin(), alive.end(), std::size_t{0});

  auto report_scored = [&](const std::vector<std::size_t>& members) {
    for (auto i : members) {
      if (!last_score[i]) continue;
      PipelineRecord rec;
      rec.steps = cohort[i].steps;
      rec.validation_score = *last_score[i];
      ev.emit(std::move(rec), std::nullopt);
    }
  };

  std::size_t rung = 0;
  while (alive.size() > 1) {
    ev.report.rung_sizes.push_back(alive.size());
    const double fraction = std::min(1.0, 0.25 * std::ldexp(1.0, static_cast<int>(rung)));
    const auto take = std::min(pool.size(), std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size())))));
    const Dataset rung_train = data.subset(std::vector<std::size_t>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take)));

    std::vector<std::size_t> scored;
    for (auto i : alive) {
      if (control.expired()) {
        // Report what this and earlier rungs measured, then stop.
        report_scored(alive);
        return ev.finish(true);
      }
      try {
        const auto model = FittedPipeline::fit(cohort[i], rung_train);
        last_score[i] = validation_score(spec.metric, model.predict_proba(holdout), holdout_truth);
        scored.push_back(i);
      } catch (const TaskError&) {
        ev.report.failed_candidates += 1;
      }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [&](std::size_t a, std::size_t b) { return *last_score[a] > *last_score[b]; });
    const std::size_t keep = (scored.size() + 1) / 2;
    std::vector<std::size_t> eliminated(scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
    std::sort(eliminated.begin(), eliminated.end());
    report_scored(eliminated);
    alive.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep));
    ++rung;
  }
  ev.report.rung_sizes.push_back(alive.size());

  if (alive.size() == 1) {
    if (control.expired()) {
      report_scored(alive);
      return ev.finish(true);
    }
    if (!ev.evaluate_cv(cohort[alive.front()])) report_scored(alive);
  }
  return ev.finish(false);
}

SearchReport run_search_strategy(SearcherKind kind, const Dataset& data, const TaskSpec& spec,
                                 const SearchControl& control) {
  switch (kind) {
    case SearcherKind::kGridTemplate: return grid_template_search(data, spec, control);
    case SearcherKind::kRandom: return random_search(data, spec, control);
    case SearcherKind::kSuccessiveHalving: return successive_halving_search(data, spec, control);
  }
  throw Error("unknown searcher kind");
}

std::string refit(const CandidatePipeline& pipeline, const Dataset& data, const ArtifactStore& store,
                  const std::string& pipeline_id) {
  const auto model = FittedPipeline::fit(pipeline, data);
  return store.write_model(pipeline_id, model);
}

void refit_best(SearchReport& report, const Dataset& data, const ArtifactStore& store,
                Clock::time_point deadline, std::size_t limit, const std::function<bool()>& stop_requested) {
  std::vector<std::size_t> order(report.pipelines.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.pipelines[a].validation_score > report.pipelines[b].validation_score;
  });
  std::size_t done = 0;
  for (auto i : order) {
    if (done >= limit) break;
    if (Clock::now() >= deadline || (stop_requested && stop_requested())) break;
    auto& rec = report.pipelines[i];
    try {
      rec.artifact_ref = refit(CandidatePipeline{rec.steps}, data, store, rec.id);
      ++done;
    } catch (const TaskError&) {
      rec.artifact_ref.clear();
    }
  }
}

}  // namespace ens2
