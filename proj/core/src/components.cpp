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

#include "components.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ens2/error.hpp"
#include "ens2/softmax.hpp"

namespace ens2::detail {

std::int64_t hyper_int(const HyperParams& hp, const std::string& name, std::int64_t fallback) {
  auto it = hp.find(name);
  if (it == hp.end()) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (const auto* d = std::get_if<double>(&it->second)) return static_cast<std::int64_t>(std::llround(*d));
  throw Error("hyperparameter '" + name + "' must be numeric");
}

double hyper_double(const HyperParams& hp, const std::string& name, double fallback) {
  auto it = hp.find(name);
  if (it == hp.end()) return fallback;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw Error("hyperparameter '" + name + "' must be numeric");
}

std::string hyper_string(const HyperParams& hp, const std::string& name, std::string fallback) {
  auto it = hp.find(name);
  if (it == hp.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw Error("hyperparameter '" + name + "' must be text");
}

json hyperparams_to_json(const HyperParams& hp) {
  json j = json::object();
  for (const auto& [k, v] : hp) {
    std::visit([&](const auto& x) { j[k] = x; }, v);
  }
  return j;
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  for (const auto& [k, v] : j.items()) {
    if (v.is_number_integer()) {
      hp[k] = v.get<std::int64_t>();
    } else if (v.is_number()) {
      hp[k] = v.get<double>();
    } else if (v.is_string()) {
      hp[k] = v.get<std::string>();
    } else {
      throw Error("hyperparameter '" + k + "' must be a scalar");
    }
  }
  return hp;
}

namespace {

json cell_to_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return nullptr;
}

Cell cell_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  return std::monostate{};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  if (m.data().size() != m.rows() * m.cols()) throw Error("matrix payload has wrong size");
  return m;
}

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

}  // namespace

// ---------------------------------------------------------------- Imputer

void Imputer::fit(const Schema& schema, std::span<const std::vector<Cell>> rows) {
  fill_.assign(schema.columns.size(), std::monostate{});
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (schema.columns[c].kind == ColumnKind::kNumeric) {
      std::vector<double> values;
      for (const auto& row : rows) {
        if (const auto* v = std::get_if<double>(&row[c])) values.push_back(*v);
      }
      if (values.empty()) {
        fill_[c] = 0.0;
        continue;
      }
      switch (strategy_) {
        case Strategy::kMean:
          fill_[c] = std::accumulate(values.begin(), values.end(), 0.0) /
                     static_cast<double>(values.size());
          break;
        case Strategy::kMedian: {
          std::sort(values.begin(), values.end());
          const std::size_t n = values.size();
          fill_[c] = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
          break;
        }
        case Strategy::kMode: {
          std::map<double, std::size_t> counts;
          for (double v : values) counts[v] += 1;
          auto best = counts.begin();
          for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) best = it;
          }
          fill_[c] = best->first;
          break;
        }
      }
    } else {
      // Categorical columns always take the most frequent value (smallest on ties).
      std::map<std::string, std::size_t> counts;
      for (const auto& row : rows) {
        if (const auto* s = std::get_if<std::string>(&row[c])) counts[*s] += 1;
      }
      if (counts.empty()) {
        fill_[c] = std::string(kUnknownCategory);
        continue;
      }
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      fill_[c] = best->first;
    }
  }
}

CellRows Imputer::transform(std::span<const std::vector<Cell>> rows) const {
  CellRows out(rows.begin(), rows.end());
  for (auto& row : out) {
    if (row.size() != fill_.size()) throw Error("imputer: column count mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (is_missing(row[c])) row[c] = fill_[c];
    }
  }
  return out;
}

json Imputer::to_json() const {
  json fill = json::array();
  for (const auto& c : fill_) fill.push_back(cell_to_json(c));
  return {{"strategy", static_cast<int>(strategy_)}, {"fill", fill}};
}

Imputer Imputer::from_json(const json& j) {
  Imputer imp(static_cast<Strategy>(j.at("strategy").get<int>()));
  for (const auto& c : j.at("fill")) imp.fill_.push_back(cell_from_json(c));
  return imp;
}

// ---------------------------------------------------------------- Encoder

void Encoder::fit(const Schema& schema, std::span<const std::vector<Cell>> rows) {
  const std::size_t width = schema.columns.size();
  categorical_.assign(width, false);
  categories_.assign(width, {});
  for (std::size_t c = 0; c < width; ++c) {
    if (schema.columns[c].kind != ColumnKind::kCategorical) continue;
    categorical_[c] = true;
    std::set<std::string> seen;
    for (const auto& row : rows) {
      if (const auto* s = std::get_if<std::string>(&row[c])) seen.insert(*s);
    }
    categories_[c].assign(seen.begin(), seen.end());
  }
}

std::size_t Encoder::output_width() const {
  std::size_t w = 0;
  for (std::size_t c = 0; c < categorical_.size(); ++c) {
    w += (categorical_[c] && kind_ == Kind::kOneHot) ? categories_[c].size() : 1;
  }
  return w;
}

Matrix Encoder::transform(std::span<const std::vector<Cell>> rows) const {
  Matrix out(rows.size(), output_width());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != categorical_.size()) throw Error("encoder: column count mismatch");
    std::size_t col = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!categorical_[c]) {
        const auto* v = std::get_if<double>(&row[c]);
        out(r, col++) = v ? *v : 0.0;
        continue;
      }
      const auto& cats = categories_[c];
      const auto* s = std::get_if<std::string>(&row[c]);
      std::ptrdiff_t idx = -1;
      if (s) {
        auto it = std::lower_bound(cats.begin(), cats.end(), *s);
        if (it != cats.end() && *it == *s) idx = it - cats.begin();
      }
      if (kind_ == Kind::kOneHot) {
        if (idx >= 0) out(r, col + static_cast<std::size_t>(idx)) = 1.0;
        col += cats.size();
      } else {
        out(r, col++) = static_cast<double>(idx);
      }
    }
  }
  return out;
}

json Encoder::to_json() const {
  return {{"kind", static_cast<int>(kind_)},
          {"categorical", categorical_},
          {"categories", categories_}};
}

Encoder Encoder::from_json(const json& j) {
  Encoder e(static_cast<Kind>(j.at("kind").get<int>()));
  e.categorical_ = j.at("categorical").get<std::vector<bool>>();
  e.categories_ = j.at("categories").get<std::vector<std::vector<std::string>>>();
  if (e.categorical_.size() != e.categories_.size()) throw Error("encoder payload inconsistent");
  return e;
}

// ---------------------------------------------------------------- Standardizer

void Standardizer::fit(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  if (n == 0) return;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean_[c] += x(r, c);
  }
  for (auto& m : mean_) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = x(r, c) - mean_[c];
      var[c] += dv * dv;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(n));
    scale_[c] = sd > 1e-12 ? sd : 1.0;
  }
}

Matrix Standardizer::transform(const Matrix& x) const {
  if (x.cols() != mean_.size()) throw Error("standardizer: column count mismatch");
  Matrix out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean_[c]) / scale_[c];
  }
  return out;
}

json Standardizer::to_json() const { return {{"mean", mean_}, {"scale", scale_}}; }

Standardizer Standardizer::from_json(const json& j) {
  Standardizer s;
  s.mean_ = j.at("mean").get<std::vector<double>>();
  s.scale_ = j.at("scale").get<std::vector<double>>();
  return s;
}

// ---------------------------------------------------------------- Estimators

namespace {

std::vector<std::size_t> class_counts(std::span<const std::size_t> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) {
    if (y >= num_classes) throw Error("label outside class range");
    counts[y] += 1;
  }
  return counts;
}

void check_fit_inputs(const Matrix& x, std::span<const std::size_t> labels) {
  if (x.rows() != labels.size()) throw Error("estimator: label count mismatch");
  if (x.rows() == 0) throw TaskError("estimator: no training rows");
}

class MajorityClass final : public Estimator {
 public:
  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) override {
    check_fit_inputs(x, labels);
    auto counts = class_counts(labels, num_classes);
    num_classes_ = num_classes;
    // max_element returns the first maximum: ties go to the lowest index.
    majority_ = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  PredictionMatrix predict_proba(const Matrix& x) const override {
    PredictionMatrix p(x.rows(), num_classes_);
    for (std::size_t r = 0; r < x.rows(); ++r) p(r, majority_) = 1.0;
    return p;
  }

  json to_json() const override {
    return {{"type", "majority"}, {"classes", num_classes_}, {"majority", majority_}};
  }

  static std::unique_ptr<Estimator> from_json(const json& j) {
    auto e = std::make_unique<MajorityClass>();
    e->num_classes_ = j.at("classes").get<std::size_t>();
    e->majority_ = j.at("majority").get<std::size_t>();
    return e;
  }

 private:
  std::size_t num_classes_ = 0;
  std::size_t majority_ = 0;
};

class GaussianNaiveBayes final : public Estimator {
 public:
  explicit GaussianNaiveBayes(double var_smoothing) : var_smoothing_(var_smoothing) {}

  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) override {
    check_fit_inputs(x, labels);
    const std::size_t n = x.rows(), d = x.cols();
    auto counts = class_counts(labels, num_classes);
    means_ = Matrix(num_classes, d);
    vars_ = Matrix(num_classes, d);
    log_prior_.assign(num_classes, -std::numeric_limits<double>::infinity());

    double max_var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double m = 0.0, v = 0.0;
      for (std::size_t r = 0; r < n; ++r) m += x(r, c);
      m /= static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) v += (x(r, c) - m) * (x(r, c) - m);
      max_var = std::max(max_var, v / static_cast<double>(n));
    }
    const double epsilon = std::max(var_smoothing_ * max_var, 1e-12);

    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) means_(labels[r], c) += x(r, c);
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
      if (counts[k] == 0) continue;
      for (std::size_t c = 0; c < d; ++c) means_(k, c) /= static_cast<double>(counts[k]);
      log_prior_[k] = std::log(static_cast<double>(counts[k]) / static_cast<double>(n));
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = x(r, c) - means_(labels[r], c);
        vars_(labels[r], c) += dv * dv;
      }
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
      for (std::size_t c = 0; c < d; ++c) {
        vars_(k, c) = (counts[k] ? vars_(k, c) / static_cast<double>(counts[k]) : 0.0) + epsilon;
      }
    }
  }

  PredictionMatrix predict_proba(const Matrix& x) const override {
    const std::size_t classes = log_prior_.size();
    if (x.cols() != means_.cols()) throw Error("naive bayes: feature count mismatch");
    PredictionMatrix p(x.rows(), classes);
    std::vector<double> joint(classes);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < classes; ++k) {
        if (!std::isfinite(log_prior_[k])) {
          joint[k] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double s = log_prior_[k];
        for (std::size_t c = 0; c < x.cols(); ++c) {
          const double dv = x(r, c) - means_(k, c);
          s -= 0.5 * (std::log(2.0 * M_PI * vars_(k, c)) + dv * dv / vars_(k, c));
        }
        joint[k] = s;
        best = std::max(best, s);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        joint[k] = std::isfinite(joint[k]) ? std::exp(joint[k] - best) : 0.0;
        sum += joint[k];
      }
      for (std::size_t k = 0; k < classes; ++k) p(r, k) = joint[k] / sum;
    }
    return p;
  }

  json to_json() const override {
    std::vector<json> prior;
    for (double v : log_prior_) prior.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    return {{"type", "gaussian_nb"},      {"var_smoothing", var_smoothing_},
            {"means", matrix_to_json(means_)}, {"vars", matrix_to_json(vars_)},
            {"log_prior", prior}};
  }

  static std::unique_ptr<Estimator> from_json(const json& j) {
    auto e = std::make_unique<GaussianNaiveBayes>(j.at("var_smoothing").get<double>());
    e->means_ = matrix_from_json(j.at("means"));
    e->vars_ = matrix_from_json(j.at("vars"));
    for (const auto& v : j.at("log_prior")) {
      e->log_prior_.push_back(v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>());
    }
    return e;
  }

 private:
  double var_smoothing_;
  Matrix means_, vars_;
  std::vector<double> log_prior_;
};

class NearestNeighbors final : public Estimator {
 public:
  explicit NearestNeighbors(std::size_t k) : k_(std::max<std::size_t>(k, 1)) {}

  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) override {
    check_fit_inputs(x, labels);
    class_counts(labels, num_classes);
    train_ = x;
    labels_.assign(labels.begin(), labels.end());
    num_classes_ = num_classes;
  }

  PredictionMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != train_.cols()) throw Error("knn: feature count mismatch");
    const std::size_t n = train_.rows();
    const std::size_t k = std::min(k_, n);
    PredictionMatrix p(x.rows(), num_classes_);
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
          const double dv = x(r, c) - train_(t, c);
          s += dv * dv;
        }
        dist[t] = {s, t};
      }
      // Pair ordering breaks distance ties by training row index.
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t i = 0; i < k; ++i) p(r, labels_[dist[i].second]) += 1.0 / static_cast<double>(k);
    }
    return p;
  }

  json to_json() const override {
    return {{"type", "knn"}, {"k", k_}, {"classes", num_classes_},
            {"train", matrix_to_json(train_)}, {"labels", labels_}};
  }

  static std::unique_ptr<Estimator> from_json(const json& j) {
    auto e = std::make_unique<NearestNeighbors>(j.at("k").get<std::size_t>());
    e->num_classes_ = j.at("classes").get<std::size_t>();
    e->train_ = matrix_from_json(j.at("train"));
    e->labels_ = j.at("labels").get<std::vector<std::size_t>>();
    return e;
  }

 private:
  std::size_t k_;
  std::size_t num_classes_ = 0;
  Matrix train_;
  std::vector<std::size_t> labels_;
};

class DecisionTree final : public Estimator {
 public:
  DecisionTree(std::size_t max_depth, std::size_t min_leaf)
      : max_depth_(max_depth), min_leaf_(std::max<std::size_t>(min_leaf, 1)) {}

  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) override {
    check_fit_inputs(x, labels);
    class_counts(labels, num_classes);
    num_classes_ = num_classes;
    nodes_.clear();
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    build(x, labels, rows, 0);
  }

  PredictionMatrix predict_proba(const Matrix& x) const override {
    PredictionMatrix p(x.rows(), num_classes_);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::size_t node = 0;
      while (nodes_[node].feature != kLeaf) {
        const auto& nd = nodes_[node];
        if (nd.feature >= x.cols()) throw Error("tree: feature count mismatch");
        node = x(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      for (std::size_t c = 0; c < num_classes_; ++c) p(r, c) = nodes_[node].probs[c];
    }
    return p;
  }

  json to_json() const override {
    json nodes = json::array();
    for (const auto& nd : nodes_) {
      nodes.push_back({{"f", nd.feature == kLeaf ? json(nullptr) : json(nd.feature)},
                       {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}, {"p", nd.probs}});
    }
    return {{"type", "decision_tree"}, {"max_depth", max_depth_}, {"min_leaf", min_leaf_},
            {"classes", num_classes_}, {"nodes", nodes}};
  }

  static std::unique_ptr<Estimator> from_json(const json& j) {
    auto e = std::make_unique<DecisionTree>(j.at("max_depth").get<std::size_t>(),
                                            j.at("min_leaf").get<std::size_t>());
    e->num_classes_ = j.at("classes").get<std::size_t>();
    for (const auto& nd : j.at("nodes")) {
      Node n;
      n.feature = nd.at("f").is_null() ? kLeaf : nd.at("f").get<std::size_t>();
      n.threshold = nd.at("t").get<double>();
      n.left = nd.at("l").get<std::size_t>();
      n.right = nd.at("r").get<std::size_t>();
      n.probs = nd.at("p").get<std::vector<double>>();
      e->nodes_.push_back(std::move(n));
    }
    if (e->nodes_.empty()) throw Error("tree payload has no nodes");
    return e;
  }

 private:
  static constexpr std::size_t kLeaf = static_cast<std::size_t>(-1);

  struct Node {
    std::size_t feature = kLeaf;
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    std::vector<double> probs;
  };

  static double gini(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double s = 1.0;
    for (auto c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      s -= p * p;
    }
    return s;
  }

  std::size_t build(const Matrix& x, std::span<const std::size_t> labels,
                    std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    std::vector<std::size_t> counts(num_classes_, 0);
    for (auto r : rows) counts[labels[r]] += 1;
    {
      auto& nd = nodes_[id];
      nd.probs.resize(num_classes_);
      for (std::size_t c = 0; c < num_classes_; ++c) {
        nd.probs[c] = static_cast<double>(counts[c]) / static_cast<double>(rows.size());
      }
    }
    const double parent = gini(counts, rows.size());
    if (depth >= max_depth_ || parent <= 0.0 || rows.size() < 2 * min_leaf_) return id;

    double best_impurity = parent;
    std::size_t best_feature = kLeaf;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = rows;
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      std::vector<std::size_t> left(num_classes_, 0), right = counts;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left[labels[order[i]]] += 1;
        right[labels[order[i]]] -= 1;
        const std::size_t nl = i + 1, nr = order.size() - nl;
        const double a = x(order[i], f), b = x(order[i + 1], f);
        if (a == b || nl < min_leaf_ || nr < min_leaf_) continue;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) +
                                 static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(order.size());
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = a + 0.5 * (b - a);
        }
      }
    }
    if (best_feature == kLeaf) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      (x(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    }
    const std::size_t l = build(x, labels, left_rows, depth + 1);
    const std::size_t r = build(x, labels, right_rows, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::size_t num_classes_ = 0;
  std::vector<Node> nodes_;
};

// Softmax regression on [x, 1]. The step is 1/L for an upper bound L on the
// gradient's Lipschitz constant, so descent is monotone at any input scale.
class SoftmaxLinear final : public Estimator {
 public:
  SoftmaxLinear(double l2, std::size_t epochs) : l2_(l2), epochs_(epochs) {}

  void fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) override {
    check_fit_inputs(x, labels);
    const Matrix design = with_bias(x);
    double mean_sq_norm = 0.0;
    for (std::size_t r = 0; r < design.rows(); ++r) {
      for (double v : design.row(r)) mean_sq_norm += v * v;
    }
    mean_sq_norm /= static_cast<double>(design.rows());
    SoftmaxTrainOptions opts;
    opts.l2_lambda = l2_;
    opts.epochs = epochs_;
    opts.step = 1.0 / (0.5 * mean_sq_norm + l2_);
    theta_ = train_softmax(design, labels, num_classes, opts).theta;
  }

  PredictionMatrix predict_proba(const Matrix& x) const override {
    return softmax_predict_proba(theta_, with_bias(x));
  }

  json to_json() const override {
    return {{"type", "softmax_linear"}, {"l2", l2_}, {"epochs", epochs_},
            {"theta", matrix_to_json(theta_)}};
  }

  static std::unique_ptr<Estimator> from_json(const json& j) {
    auto e = std::make_unique<SoftmaxLinear>(j.at("l2").get<double>(), j.at("epochs").get<std::size_t>());
    e->theta_ = matrix_from_json(j.at("theta"));
    return e;
  }

 private:
  static Matrix with_bias(const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c);
      out(r, x.cols()) = 1.0;
    }
    return out;
  }

  double l2_;
  std::size_t epochs_;
  Matrix theta_;
};

}  // namespace

std::unique_ptr<Estimator> make_estimator(const std::string& name, const HyperParams& hp) {
  if (name == "majority") return std::make_unique<MajorityClass>();
  if (name == "gaussian_nb") {
    return std::make_unique<GaussianNaiveBayes>(hyper_double(hp, "var_smoothing", 1e-9));
  }
  if (name == "knn") {
    return std::make_unique<NearestNeighbors>(static_cast<std::size_t>(hyper_int(hp, "k", 5)));
  }
  if (name == "decision_tree") {
    return std::make_unique<DecisionTree>(static_cast<std::size_t>(hyper_int(hp, "max_depth", 4)),
                                          static_cast<std::size_t>(hyper_int(hp, "min_samples_leaf", 1)));
  }
  if (name == "softmax_linear") {
    return std::make_unique<SoftmaxLinear>(hyper_double(hp, "l2", 1e-3),
                                           static_cast<std::size_t>(hyper_int(hp, "epochs", 200)));
  }
  throw Error("unknown estimator '" + name + "'");
}

std::unique_ptr<Estimator> estimator_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "majority") return MajorityClass::from_json(j);
  if (type == "gaussian_nb") return GaussianNaiveBayes::from_json(j);
  if (type == "knn") return NearestNeighbors::from_json(j);
  if (type == "decision_tree") return DecisionTree::from_json(j);
  if (type == "softmax_linear") return SoftmaxLinear::from_json(j);
  throw Error("unknown estimator type '" + type + "' in artifact");
}

}  // namespace ens2::detail
