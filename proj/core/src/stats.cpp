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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "ens2/rng.hpp"
#include "ens2/stats.hpp"

namespace ens2 {

std::vector<std::size_t> FoldAssignment::rows_in(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] == fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::rows_not_in(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] != fold) out.push_back(r);
  }
  return out;
}

FoldAssignment kfold(std::size_t n, std::size_t k,
                     std::optional<std::span<const std::size_t>> labels, std::uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be at least 2");
  if (k > n) throw Error("kfold: k=" + std::to_string(k) + " exceeds row count " + std::to_string(n));
  if (labels && labels->size() != n) throw Error("kfold: label count does not match n");

  Rng rng(seed);
  std::vector<std::size_t> order;
  order.reserve(n);
  if (labels) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < n; ++r) by_class[(*labels)[r]].push_back(r);
    for (auto& [cls, rows] : by_class) {
      rng.shuffle(std::span<std::size_t>(rows));
      order.insert(order.end(), rows.begin(), rows.end());
    }
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
  }

  FoldAssignment folds{k, std::vector<std::size_t>(n)};
  for (std::size_t pos = 0; pos < n; ++pos) folds.assignment[order[pos]] = pos % k;
  return folds;
}

double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  if (pred.size() != truth.size()) throw Error("accuracy: length mismatch");
  if (pred.empty()) throw Error("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double logloss(const PredictionMatrix& probs, std::span<const std::size_t> truth, double eps) {
  if (probs.rows() != truth.size()) throw Error("logloss: row count mismatch");
  if (truth.empty()) throw Error("logloss: empty input");
  double total = 0.0;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    if (truth[r] >= probs.cols()) throw Error("logloss: label outside probability columns");
    const double p = std::clamp(probs(r, truth[r]), eps, 1.0 - eps);
    total -= std::log(p);
  }
  return total / static_cast<double>(truth.size());
}

std::vector<double> fractional_ranks(std::span<const double> values, bool higher_better) {
  if (values.empty()) throw Error("fractional_ranks: empty input");
  for (double v : values) {
    if (std::isnan(v)) throw Error("fractional_ranks: NaN input");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) hold ranks i+1..j+1.
    const double mean_rank = static_cast<double>(i + j + 2) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

ScoreTable::ScoreTable(std::vector<std::string> systems, std::vector<std::string> datasets,
                       std::vector<std::uint64_t> seeds)
    : systems_(std::move(systems)),
      datasets_(std::move(datasets)),
      seeds_(std::move(seeds)),
      scores_(systems_.size() * datasets_.size() * seeds_.size()) {}

std::size_t ScoreTable::index(std::size_t system, std::size_t dataset, std::size_t seed) const {
  if (system >= systems_.size() || dataset >= datasets_.size() || seed >= seeds_.size()) {
    throw Error("ScoreTable: index out of range");
  }
  return (system * datasets_.size() + dataset) * seeds_.size() + seed;
}

void ScoreTable::set(std::size_t system, std::size_t dataset, std::size_t seed,
                     std::optional<double> acc) {
  if (acc && !(*acc >= 0.0 && *acc <= 1.0)) throw Error("ScoreTable: accuracy outside [0,1]");
  scores_[index(system, dataset, seed)] = acc;
}

std::optional<double> ScoreTable::get(std::size_t system, std::size_t dataset,
                                      std::size_t seed) const {
  return scores_[index(system, dataset, seed)];
}

std::string ScoreTable::to_csv() const {
  std::ostringstream out;
  out << "system,dataset,seed,accuracy,status\n";
  for (std::size_t d = 0; d < datasets_.size(); ++d) {
    for (std::size_t s = 0; s < seeds_.size(); ++s) {
      for (std::size_t m = 0; m < systems_.size(); ++m) {
        auto acc = get(m, d, s);
        out << csv_escape(systems_[m]) << ',' << csv_escape(datasets_[d]) << ',' << seeds_[s]
            << ',' << (acc ? format_double(*acc) : std::string()) << ','
            << (acc ? "ok" : "FAILED") << '\n';
      }
    }
  }
  return out.str();
}

ScoreTable ScoreTable::from_csv(std::string_view text) {
  auto records = parse_csv_records(text);
  if (records.empty()) throw ParseError("score table: missing header");
  const std::vector<std::string> expected{"system", "dataset", "seed", "accuracy", "status"};
  if (records.front() != expected) throw ParseError("score table: unexpected header");

  std::vector<std::string> systems, datasets;
  std::vector<std::uint64_t> seeds;
  auto intern = [](auto& list, const auto& v) {
    auto it = std::find(list.begin(), list.end(), v);
    if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
    list.push_back(v);
    return list.size() - 1;
  };
  struct Entry {
    std::size_t m, d, s;
    std::optional<double> acc;
  };
  std::vector<Entry> entries;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != 5) throw ParseError("score table: ragged row " + std::to_string(r));
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(rec[2]);
    } catch (const std::exception&) {
      throw ParseError("score table: bad seed on row " + std::to_string(r));
    }
    Entry e{intern(systems, rec[0]), intern(datasets, rec[1]), intern(seeds, seed), std::nullopt};
    if (rec[4] == "ok") {
      try {
        e.acc = std::stod(rec[3]);
      } catch (const std::exception&) {
        throw ParseError("score table: bad accuracy on row " + std::to_string(r));
      }
    } else if (rec[4] != "FAILED") {
      throw ParseError("score table: unknown status '" + rec[4] + "'");
    }
    entries.push_back(e);
  }
  ScoreTable table(systems, datasets, seeds);
  for (const auto& e : entries) table.set(e.m, e.d, e.s, e.acc);
  return table;
}

std::vector<SystemSummary> summarize(const ScoreTable& table) {
  const auto& systems = table.systems();
  if (systems.empty() || table.num_cells() == 0) throw Error("summarize: empty score table");

  std::vector<SystemSummary> out(systems.size());
  std::vector<double> acc_sum(systems.size(), 0.0), rank_sum(systems.size(), 0.0);
  for (std::size_t m = 0; m < systems.size(); ++m) out[m].system = systems[m];

  for (std::size_t d = 0; d < table.datasets().size(); ++d) {
    for (std::size_t s = 0; s < table.seeds().size(); ++s) {
      std::vector<std::size_t> present;
      std::vector<double> values;
      for (std::size_t m = 0; m < systems.size(); ++m) {
        if (auto acc = table.get(m, d, s)) {
          present.push_back(m);
          values.push_back(*acc);
        }
      }
      if (present.empty()) continue;
      auto ranks = fractional_ranks(values, /*higher_better=*/true);
      const double best = *std::min_element(ranks.begin(), ranks.end());
      for (std::size_t i = 0; i < present.size(); ++i) {
        const std::size_t m = present[i];
        acc_sum[m] += values[i];
        rank_sum[m] += ranks[i];
        out[m].scored_cells += 1;
        if (ranks[i] == best) out[m].first_place_count += 1;
      }
    }
  }
  for (std::size_t m = 0; m < systems.size(); ++m) {
    if (out[m].scored_cells == 0) {
      out[m].avg_accuracy = std::numeric_limits<double>::quiet_NaN();
      out[m].avg_rank = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double n = static_cast<double>(out[m].scored_cells);
    out[m].avg_accuracy = acc_sum[m] / n;
    out[m].avg_rank = rank_sum[m] / n;
  }
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    double alpha) {
  if (x.size() != y.size()) throw Error("wilcoxon: length mismatch");
  if (x.empty()) throw Error("wilcoxon: empty input");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (std::isnan(d)) throw Error("wilcoxon: NaN difference");
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult res;
  res.n_effective = diffs.size();
  if (diffs.empty()) return res;

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::fabs(d); });
  const auto ranks = fractional_ranks(magnitudes, /*higher_better=*/false);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0) res.statistic += ranks[i];
  }

  const std::size_t n = diffs.size();
  if (n <= kWilcoxonExactMaxN) {
    // Fractional ranks are multiples of 1/2, so doubled ranks are integers and
    // the null distribution of 2*W+ is a subset-sum count over them.
    std::vector<std::size_t> doubled(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    for (auto r : doubled) {
      for (std::size_t s = total; s >= r; --s) {
        counts[s] += counts[s - r];
        if (s == r) break;
      }
    }
    const auto observed = static_cast<std::size_t>(std::lround(2.0 * res.statistic));
    std::uint64_t upper = 0, lower = 0;
    for (std::size_t s = 0; s <= total; ++s) {
      if (s >= observed) upper += counts[s];
      if (s <= observed) lower += counts[s];
    }
    const double assignments = std::ldexp(1.0, static_cast<int>(n));
    res.p_two_sided = std::min(1.0, 2.0 * static_cast<double>(std::min(upper, lower)) / assignments);
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    std::map<double, std::size_t> tie_groups;
    for (double m : magnitudes) tie_groups[m] += 1;
    for (const auto& [value, t] : tie_groups) {
      const double tt = static_cast<double>(t);
      variance -= (tt * tt * tt - tt) / 48.0;
    }
    double z = 0.0;
    if (variance > 0.0) z = std::max(0.0, std::fabs(res.statistic - mean) - 0.5) / std::sqrt(variance);
    res.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    res.exact = false;
  }
  res.reject = res.p_two_sided < alpha;
  return res;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("pearson: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::vector<std::optional<double>>> pearson_correlation_matrix(const ScoreTable& table) {
  const std::size_t m = table.systems().size();
  std::vector<std::vector<std::optional<double>>> out(m, std::vector<std::optional<double>>(m));
  for (std::size_t i = 0; i < m; ++i) {
    out[i][i] = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      std::vector<double> a, b;
      for (std::size_t d = 0; d < table.datasets().size(); ++d) {
        for (std::size_t s = 0; s < table.seeds().size(); ++s) {
          auto va = table.get(i, d, s);
          auto vb = table.get(j, d, s);
          if (va && vb) {
            a.push_back(*va);
            b.push_back(*vb);
          }
        }
      }
      out[i][j] = out[j][i] = pearson(a, b);
    }
  }
  return out;
}

}  // namespace ens2
