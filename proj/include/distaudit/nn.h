// Copyright 2026 The DistAudit Authors
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

// A single-hidden-layer rectifier network with exact analytic gradients,
// trained by momentum SGD on hard labels, soft (distillation) targets, or
// an alpha-weighted mix of the two.

#ifndef DISTAUDIT_NN_H_
#define DISTAUDIT_NN_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace distaudit {

// Weights of an input -> hidden (ReLU) -> output network. Matrices are
// row-major: `w1` is hidden x input_dim, `w2` is classes x hidden.
// Gradients share this layout.
struct ModelParams {
  size_t input_dim = 0;
  size_t hidden = 0;
  size_t classes = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  // Zero-valued parameters of the given shape.
  static ModelParams Zeros(size_t input_dim, size_t hidden, size_t classes);

  size_t NumParams() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  // Checks shape consistency and that every entry is finite.
  absl::Status Validate() const;

  // Visits all parameters in a fixed order: w1, b1, w2, b2.
  template <typename F>
  void ForEachParam(F&& f) {
    for (auto* v : {&w1, &b1, &w2, &b2}) {
      for (double& x : *v) f(x);
    }
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

enum class LossMode {
  kHard,   // sparse cross entropy against integer labels, H = 1
  kSoft,   // dense cross entropy against stored soft targets at temperature H
  kMixed,  // alpha * soft + (1 - alpha) * hard
};

struct TrainConfig {
  size_t hidden_width = 64;
  int epochs = 20;
  double learning_rate = 0.01;
  double momentum = 0.99;
  size_t batch_size = 64;
  uint64_t seed = 0;
  double temperature = 1.0;
  double alpha = 1.0;
  // Multiplies the soft-loss term (and so its gradient) by 1 / H^2.
  bool gradient_rescale = false;

  absl::Status Validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Non-owning view of a training set. `features` is n x input_dim row-major.
// `hard_labels` is required for kHard and kMixed, `soft_targets`
// (n x classes row-major) for kSoft and kMixed.
struct TrainingData {
  std::span<const double> features;
  size_t num_examples = 0;
  std::span<const int> hard_labels;
  std::span<const double> soft_targets;
  LossMode mode = LossMode::kHard;
};

struct LossAndGradient {
  double loss = 0.0;
  ModelParams grad;
};

// Glorot-uniform weights, zero biases. Deterministic in `seed`.
absl::StatusOr<ModelParams> InitModel(size_t input_dim, size_t hidden,
                                      size_t classes, uint64_t seed);

// logits = W2 relu(W1 x + b1) + b2.
absl::StatusOr<std::vector<double>> ForwardLogits(const ModelParams& model,
                                                  std::span<const double> x);

// Unvalidated forward pass. `hidden_scratch` must hold model.hidden doubles
// and `logits` model.classes doubles.
void ForwardLogitsInto(const ModelParams& model, const double* x,
                       double* hidden_scratch, double* logits);

// Logits for every row of an n x input_dim feature matrix, n x classes out.
absl::StatusOr<std::vector<double>> BatchLogits(
    const ModelParams& model, std::span<const double> features);

// Max-subtracted softmax of z / H.
absl::StatusOr<std::vector<double>> SoftmaxTemperature(
    std::span<const double> z, double temperature);

// In-place variant for hot loops; H must be positive.
void SoftmaxTemperatureInto(std::span<const double> z, double temperature,
                            std::span<double> out);

// Checks labels, soft-target normalization and shapes against the model.
absl::Status ValidateTrainingData(const ModelParams& model,
                                  const TrainingData& data);

// Mean loss over all rows of `data` and its exact gradient.
absl::StatusOr<LossAndGradient> LossAndGrad(const ModelParams& model,
                                            const TrainingData& data,
                                            const TrainConfig& config);

// Classic momentum SGD over seeded per-epoch shuffles. Bitwise
// deterministic given (initial params, data, config).
absl::StatusOr<ModelParams> SgdTrain(ModelParams model,
                                     const TrainingData& data,
                                     const TrainConfig& config);

// Fraction of rows whose argmax logit equals the label.
double Accuracy(const ModelParams& model, std::span<const double> features,
                std::span<const int> labels);

}  // namespace distaudit

#endif  // DISTAUDIT_NN_H_
