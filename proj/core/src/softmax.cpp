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

#include "ens2/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "ens2/error.hpp"

namespace ens2 {

namespace {

void check_shapes(const Matrix& theta, const Matrix& features, std::span<const std::size_t> labels) {
  if (theta.cols() != features.cols()) throw Error("softmax: feature dimension mismatch");
  if (features.rows() != labels.size()) throw Error("softmax: label count mismatch");
  for (auto y : labels) {
    if (y >= theta.rows()) throw Error("softmax: label outside class range");
  }
}

// Returns log-sum-exp of the logits and leaves softmax probabilities in `probs`.
double logits_to_probs(const Matrix& theta, std::span<const double> x, std::span<double> probs) {
  const std::size_t classes = theta.rows();
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes; ++c) {
    double z = 0.0;
    auto row = theta.row(c);
    for (std::size_t f = 0; f < x.size(); ++f) z += row[f] * x[f];
    probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    probs[c] = std::exp(probs[c] - max_logit);
    sum += probs[c];
  }
  for (std::size_t c = 0; c < classes; ++c) probs[c] /= sum;
  return max_logit + std::log(sum);
}

double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

}  // namespace

void softmax_probabilities(const Matrix& theta, std::span<const double> x, std::span<double> out) {
  if (x.size() != theta.cols() || out.size() != theta.rows()) {
    throw Error("softmax: dimension mismatch");
  }
  logits_to_probs(theta, x, out);
}

Matrix softmax_predict_proba(const Matrix& theta, const Matrix& features) {
  if (features.cols() != theta.cols()) throw Error("softmax: feature dimension mismatch");
  Matrix out(features.rows(), theta.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    logits_to_probs(theta, features.row(r), out.row(r));
  }
  return out;
}

double softmax_objective(const Matrix& theta, const Matrix& features,
                         std::span<const std::size_t> labels, double l2_lambda) {
  check_shapes(theta, features, labels);
  std::vector<double> probs(theta.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    const double lse = logits_to_probs(theta, x, probs);
    double z = 0.0;
    auto row = theta.row(labels[r]);
    for (std::size_t f = 0; f < x.size(); ++f) z += row[f] * x[f];
    total += lse - z;
  }
  const double n = static_cast<double>(std::max<std::size_t>(features.rows(), 1));
  return total / n + 0.5 * l2_lambda * squared_norm(theta);
}

Matrix softmax_gradient(const Matrix& theta, const Matrix& features,
                        std::span<const std::size_t> labels, double l2_lambda) {
  check_shapes(theta, features, labels);
  const std::size_t classes = theta.rows();
  Matrix grad(classes, theta.cols());
  std::vector<double> probs(classes);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    logits_to_probs(theta, x, probs);
    probs[labels[r]] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (probs[c] == 0.0) continue;
      auto g = grad.row(c);
      for (std::size_t f = 0; f < x.size(); ++f) g[f] += probs[c] * x[f];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(features.rows(), 1));
  auto& g = grad.data();
  const auto& t = theta.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv_n + l2_lambda * t[i];
  return grad;
}

SoftmaxFit train_softmax(const Matrix& features, std::span<const std::size_t> labels,
                         std::size_t num_classes, const SoftmaxTrainOptions& options) {
  if (num_classes == 0) throw Error("softmax: no classes");
  if (options.l2_lambda < 0.0) throw Error("softmax: negative L2 penalty");
  SoftmaxFit fit;
  fit.theta = Matrix(num_classes, features.cols());
  check_shapes(fit.theta, features, labels);
  fit.loss_history.reserve(options.epochs + 1);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = softmax_objective(fit.theta, features, labels, options.l2_lambda);
    if (!std::isfinite(loss)) {
      throw TaskError("softmax training diverged at epoch " + std::to_string(epoch) +
                      " (step too large)");
    }
    fit.loss_history.push_back(loss);
    const Matrix grad = softmax_gradient(fit.theta, features, labels, options.l2_lambda);
    auto& t = fit.theta.data();
    const auto& g = grad.data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] -= options.step * g[i];
  }
  fit.final_loss = softmax_objective(fit.theta, features, labels, options.l2_lambda);
  if (!std::isfinite(fit.final_loss)) throw TaskError("softmax training diverged (step too large)");
  fit.loss_history.push_back(fit.final_loss);
  return fit;
}

}  // namespace ens2
