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
#include <span>
#include <vector>

#include "ens2/matrix.hpp"

namespace ens2 {

// Multinomial logistic regression kernel shared by the linear estimator and
// the stacker. theta is classes x features; there is no implicit bias column.
//
//   objective(theta) = mean_i -log softmax(theta x_i)[y_i] + (lambda/2)|theta|^2

struct SoftmaxTrainOptions {
  double l2_lambda = 1e-3;
  std::size_t epochs = 500;
  double step = 0.1;
};

struct SoftmaxFit {
  Matrix theta;
  double final_loss = 0.0;
  // Objective before each update, then the final value (epochs + 1 entries).
  std::vector<double> loss_history;
};

// Writes softmax(theta x) into `out`, subtracting the max logit first.
void softmax_probabilities(const Matrix& theta, std::span<const double> x, std::span<double> out);

Matrix softmax_predict_proba(const Matrix& theta, const Matrix& features);

double softmax_objective(const Matrix& theta, const Matrix& features,
                         std::span<const std::size_t> labels, double l2_lambda);

// Analytic gradient of softmax_objective.
Matrix softmax_gradient(const Matrix& theta, const Matrix& features,
                        std::span<const std::size_t> labels, double l2_lambda);

// Full-batch gradient descent from theta = 0. Throws TaskError when the
// objective becomes non-finite.
SoftmaxFit train_softmax(const Matrix& features, std::span<const std::size_t> labels,
                         std::size_t num_classes, const SoftmaxTrainOptions& options);

}  // namespace ens2
