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

#include "distaudit/nn.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "absl/strings/str_format.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

constexpr double kSoftTargetTolerance = 1e-9;

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Per-call scratch buffers for one example's forward/backward pass.
struct Workspace {
  explicit Workspace(const ModelParams& m)
      : pre(m.hidden), act(m.hidden), dact(m.hidden), logits(m.classes),
        probs(m.classes), soft_probs(m.classes), dz(m.classes) {}
  std::vector<double> pre, act, dact, logits, probs, soft_probs, dz;
};

// log(sum(exp(v / t))) computed around the maximum.
double LogSumExp(std::span<const double> v, double t) {
  const double mx = *std::max_element(v.begin(), v.end()) / t;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x / t - mx);
  return mx + std::log(sum);
}

// Adds the gradient of the mean loss over `rows` into `grad` (which must be
// zeroed by the caller) and returns the mean loss.
double AccumulateBatch(const ModelParams& m, const TrainingData& data,
                       const TrainConfig& cfg, std::span<const size_t> rows,
                       ModelParams& grad, Workspace& ws) {
  const size_t d = m.input_dim, h = m.hidden, c = m.classes;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  const double t = cfg.temperature;
  double soft_weight = 0.0, hard_weight = 0.0;
  switch (data.mode) {
    case LossMode::kHard:
      hard_weight = 1.0;
      break;
    case LossMode::kSoft:
      soft_weight = 1.0;
      break;
    case LossMode::kMixed:
      soft_weight = cfg.alpha;
      hard_weight = 1.0 - cfg.alpha;
      break;
  }
  const double soft_scale = cfg.gradient_rescale ? 1.0 / (t * t) : 1.0;

  double loss = 0.0;
  for (size_t r : rows) {
    const double* x = data.features.data() + r * d;
    for (size_t j = 0; j < h; ++j) {
      const double* w = m.w1.data() + j * d;
      double s = m.b1[j];
      for (size_t k = 0; k < d; ++k) s += w[k] * x[k];
      ws.pre[j] = s;
      ws.act[j] = s > 0.0 ? s : 0.0;
    }
    for (size_t o = 0; o < c; ++o) {
      const double* w = m.w2.data() + o * h;
      double s = m.b2[o];
      for (size_t j = 0; j < h; ++j) s += w[j] * ws.act[j];
      ws.logits[o] = s;
    }

    std::fill(ws.dz.begin(), ws.dz.end(), 0.0);
    if (hard_weight != 0.0) {
      const int y = data.hard_labels[r];
      const double lse = LogSumExp(ws.logits, 1.0);
      double example_loss = lse - ws.logits[y];
      SoftmaxTemperatureInto(ws.logits, 1.0, ws.probs);
      if (hard_weight == 1.0) {
        loss += example_loss;
        for (size_t o = 0; o < c; ++o) ws.dz[o] = ws.probs[o];
        ws.dz[y] -= 1.0;
      } else {
        loss += hard_weight * example_loss;
        for (size_t o = 0; o < c; ++o) ws.dz[o] = hard_weight * ws.probs[o];
        ws.dz[y] -= hard_weight;
      }
    }
    if (soft_weight != 0.0) {
      const double* q = data.soft_targets.data() + r * c;
      const double lse = LogSumExp(ws.logits, t);
      double example_loss = 0.0;
      for (size_t o = 0; o < c; ++o) {
        if (q[o] != 0.0) example_loss -= q[o] * (ws.logits[o] / t - lse);
      }
      SoftmaxTemperatureInto(ws.logits, t, ws.soft_probs);
      const double w = soft_weight * soft_scale;
      loss += w * example_loss;
      for (size_t o = 0; o < c; ++o) {
        ws.dz[o] += w * (ws.soft_probs[o] - q[o]) / t;
      }
    }
    for (size_t o = 0; o < c; ++o) ws.dz[o] *= inv_n;

    for (size_t o = 0; o < c; ++o) {
      const double g = ws.dz[o];
      grad.b2[o] += g;
      double* gw = grad.w2.data() + o * h;
      for (size_t j = 0; j < h; ++j) gw[j] += g * ws.act[j];
    }
    std::fill(ws.dact.begin(), ws.dact.end(), 0.0);
    for (size_t o = 0; o < c; ++o) {
      const double g = ws.dz[o];
      const double* w = m.w2.data() + o * h;
      for (size_t j = 0; j < h; ++j) ws.dact[j] += g * w[j];
    }
    for (size_t j = 0; j < h; ++j) {
      if (ws.pre[j] <= 0.0) continue;
      const double g = ws.dact[j];
      grad.b1[j] += g;
      double* gw = grad.w1.data() + j * d;
      for (size_t k = 0; k < d; ++k) gw[k] += g * x[k];
    }
  }
  return loss * inv_n;
}

void ZeroParams(ModelParams& p) {
  p.ForEachParam([](double& x) { x = 0.0; });
}

}  // namespace

ModelParams ModelParams::Zeros(size_t input_dim, size_t hidden,
                               size_t classes) {
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.classes = classes;
  p.w1.assign(hidden * input_dim, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(classes * hidden, 0.0);
  p.b2.assign(classes, 0.0);
  return p;
}

absl::Status ModelParams::Validate() const {
  if (input_dim == 0 || hidden == 0 || classes == 0) {
    return absl::InvalidArgumentError("model has a zero dimension");
  }
  if (w1.size() != hidden * input_dim || b1.size() != hidden ||
      w2.size() != classes * hidden || b2.size() != classes) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "parameter shapes inconsistent with (%d, %d, %d)", input_dim, hidden,
        classes));
  }
  if (!AllFinite(w1) || !AllFinite(b1) || !AllFinite(w2) || !AllFinite(b2)) {
    return absl::InvalidArgumentError("model has non-finite parameters");
  }
  return absl::OkStatus();
}

absl::Status TrainConfig::Validate() const {
  if (hidden_width < 1) {
    return absl::InvalidArgumentError("hidden_width must be >= 1");
  }
  if (epochs < 1) return absl::InvalidArgumentError("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    return absl::InvalidArgumentError("learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    return absl::InvalidArgumentError("momentum must lie in [0, 1)");
  }
  if (batch_size < 1) {
    return absl::InvalidArgumentError("batch_size must be >= 1");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    return absl::InvalidArgumentError("temperature must be > 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    return absl::InvalidArgumentError("alpha must lie in [0, 1]");
  }
  return absl::OkStatus();
}

absl::StatusOr<ModelParams> InitModel(size_t input_dim, size_t hidden,
                                      size_t classes, uint64_t seed) {
  if (input_dim == 0 || hidden == 0 || classes == 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "InitModel: dimensions must be >= 1, got (%d, %d, %d)", input_dim,
        hidden, classes));
  }
  ModelParams p = ModelParams::Zeros(input_dim, hidden, classes);
  std::mt19937_64 rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  std::uniform_real_distribution<double> u1(-a1, a1);
  std::uniform_real_distribution<double> u2(-a2, a2);
  for (double& w : p.w1) w = u1(rng);
  for (double& w : p.w2) w = u2(rng);
  return p;
}

void ForwardLogitsInto(const ModelParams& m, const double* x,
                       double* hidden_scratch, double* logits) {
  const size_t d = m.input_dim, h = m.hidden;
  for (size_t j = 0; j < h; ++j) {
    const double* w = m.w1.data() + j * d;
    double s = m.b1[j];
    for (size_t k = 0; k < d; ++k) s += w[k] * x[k];
    hidden_scratch[j] = s > 0.0 ? s : 0.0;
  }
  for (size_t o = 0; o < m.classes; ++o) {
    const double* w = m.w2.data() + o * h;
    double s = m.b2[o];
    for (size_t j = 0; j < h; ++j) s += w[j] * hidden_scratch[j];
    logits[o] = s;
  }
}

absl::StatusOr<std::vector<double>> ForwardLogits(const ModelParams& model,
                                                  std::span<const double> x) {
  if (x.size() != model.input_dim) {
    return absl::InvalidArgumentError(
        absl::StrFormat("ForwardLogits: input has %d features, model expects %d",
                        x.size(), model.input_dim));
  }
  if (!AllFinite(x)) {
    return absl::InvalidArgumentError("ForwardLogits: non-finite input");
  }
  std::vector<double> hidden(model.hidden);
  std::vector<double> logits(model.classes);
  ForwardLogitsInto(model, x.data(), hidden.data(), logits.data());
  return logits;
}

absl::StatusOr<std::vector<double>> BatchLogits(
    const ModelParams& model, std::span<const double> features) {
  if (model.input_dim == 0 || features.size() % model.input_dim != 0) {
    return absl::InvalidArgumentError(
        "BatchLogits: feature matrix width does not match the model");
  }
  if (!AllFinite(features)) {
    return absl::InvalidArgumentError("BatchLogits: non-finite input");
  }
  const size_t n = features.size() / model.input_dim;
  std::vector<double> hidden(model.hidden);
  std::vector<double> logits(n * model.classes);
  for (size_t i = 0; i < n; ++i) {
    ForwardLogitsInto(model, features.data() + i * model.input_dim,
                      hidden.data(), logits.data() + i * model.classes);
  }
  return logits;
}

void SoftmaxTemperatureInto(std::span<const double> z, double temperature,
                            std::span<double> out) {
  const double mx = *std::max_element(z.begin(), z.end()) / temperature;
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] / temperature - mx);
    sum += out[i];
  }
  for (size_t i = 0; i < z.size(); ++i) out[i] /= sum;
}

absl::StatusOr<std::vector<double>> SoftmaxTemperature(
    std::span<const double> z, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "SoftmaxTemperature: temperature must be > 0, got %g", temperature));
  }
  if (z.empty()) {
    return absl::InvalidArgumentError("SoftmaxTemperature: empty logits");
  }
  if (!AllFinite(z)) {
    return absl::InvalidArgumentError("SoftmaxTemperature: non-finite logit");
  }
  std::vector<double> out(z.size());
  SoftmaxTemperatureInto(z, temperature, out);
  return out;
}

absl::Status ValidateTrainingData(const ModelParams& model,
                                  const TrainingData& data) {
  const size_t n = data.num_examples;
  if (n == 0) return absl::InvalidArgumentError("training data is empty");
  if (data.features.size() != n * model.input_dim) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "feature matrix has %d values, expected %d x %d", data.features.size(),
        n, model.input_dim));
  }
  if (!AllFinite(data.features)) {
    return absl::InvalidArgumentError("training features contain non-finite values");
  }
  const bool needs_hard = data.mode != LossMode::kSoft;
  const bool needs_soft = data.mode != LossMode::kHard;
  if (needs_hard) {
    if (data.hard_labels.size() != n) {
      return absl::InvalidArgumentError("hard label count does not match data");
    }
    for (size_t i = 0; i < n; ++i) {
      const int y = data.hard_labels[i];
      if (y < 0 || static_cast<size_t>(y) >= model.classes) {
        return absl::InvalidArgumentError(
            absl::StrFormat("label %d at row %d outside [0, %d)", y, i,
                            model.classes));
      }
    }
  }
  if (needs_soft) {
    const size_t c = model.classes;
    if (data.soft_targets.size() != n * c) {
      return absl::InvalidArgumentError("soft target matrix has the wrong shape");
    }
    for (size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (size_t o = 0; o < c; ++o) {
        const double q = data.soft_targets[i * c + o];
        if (!(q >= 0.0) || !std::isfinite(q)) {
          return absl::InvalidArgumentError(
              absl::StrFormat("soft target row %d has an invalid entry", i));
        }
        sum += q;
      }
      if (std::abs(sum - 1.0) > kSoftTargetTolerance) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "soft target row %d sums to %.17g, not 1", i, sum));
      }
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<LossAndGradient> LossAndGrad(const ModelParams& model,
                                            const TrainingData& data,
                                            const TrainConfig& config) {
  DISTAUDIT_RETURN_IF_ERROR(config.Validate());
  DISTAUDIT_RETURN_IF_ERROR(model.Validate());
  DISTAUDIT_RETURN_IF_ERROR(ValidateTrainingData(model, data));
  std::vector<size_t> rows(data.num_examples);
  std::iota(rows.begin(), rows.end(), size_t{0});
  LossAndGradient out;
  out.grad = ModelParams::Zeros(model.input_dim, model.hidden, model.classes);
  Workspace ws(model);
  out.loss = AccumulateBatch(model, data, config, rows, out.grad, ws);
  return out;
}

absl::StatusOr<ModelParams> SgdTrain(ModelParams model,
                                     const TrainingData& data,
                                     const TrainConfig& config) {
  DISTAUDIT_RETURN_IF_ERROR(config.Validate());
  DISTAUDIT_RETURN_IF_ERROR(model.Validate());
  DISTAUDIT_RETURN_IF_ERROR(ValidateTrainingData(model, data));

  const size_t n = data.num_examples;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(config.seed);
  ModelParams grad =
      ModelParams::Zeros(model.input_dim, model.hidden, model.classes);
  ModelParams velocity = grad;
  Workspace ws(model);

  auto update = [&](std::vector<double>& w, std::vector<double>& v,
                    const std::vector<double>& g) {
    for (size_t i = 0; i < w.size(); ++i) {
      v[i] = config.momentum * v[i] - config.learning_rate * g[i];
      w[i] += v[i];
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += config.batch_size) {
      const size_t end = std::min(n, start + config.batch_size);
      ZeroParams(grad);
      AccumulateBatch(model, data, config,
                      std::span<const size_t>(order).subspan(start, end - start),
                      grad, ws);
      update(model.w1, velocity.w1, grad.w1);
      update(model.b1, velocity.b1, grad.b1);
      update(model.w2, velocity.w2, grad.w2);
      update(model.b2, velocity.b2, grad.b2);
    }
  }
  if (!model.Validate().ok()) {
    return absl::InternalError(absl::StrFormat(
        "SGD diverged to non-finite parameters (seed %d)", config.seed));
  }
  return model;
}

double Accuracy(const ModelParams& model, std::span<const double> features,
                std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::vector<double> hidden(model.hidden), logits(model.classes);
  size_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    ForwardLogitsInto(model, features.data() + i * model.input_dim,
                      hidden.data(), logits.data());
    const auto best = std::max_element(logits.begin(), logits.end());
    if (best - logits.begin() == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace distaudit
