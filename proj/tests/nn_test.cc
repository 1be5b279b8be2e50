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

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "test_util.h"

namespace distaudit {
namespace {

using ::distaudit::testing::Gen;
using ::distaudit::testing::StatusIs;
using ::testing::Each;
using ::testing::Not;

std::vector<double> Flatten(ModelParams m) {
  std::vector<double> out;
  m.ForEachParam([&](double& x) { out.push_back(x); });
  return out;
}

TEST(InitModelTest, SameSeedIsBitwiseIdentical) {
  ASSERT_OK_AND_ASSIGN(ModelParams a, InitModel(4, 8, 3, 1));
  ASSERT_OK_AND_ASSIGN(ModelParams b, InitModel(4, 8, 3, 1));
  EXPECT_EQ(a, b);
  ASSERT_OK_AND_ASSIGN(ModelParams c, InitModel(4, 8, 3, 2));
  EXPECT_NE(a, c);
}

TEST(InitModelTest, ZeroDimensionRejected) {
  EXPECT_THAT(InitModel(0, 8, 3, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(InitModel(4, 0, 3, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(InitModel(4, 8, 0, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(InitModelTest, WeightsFollowGlorotUniform) {
  const size_t d = 32, h = 64, c = 10;
  ASSERT_OK_AND_ASSIGN(ModelParams m, InitModel(d, h, c, 99));
  const double a1 = std::sqrt(6.0 / (d + h));
  // Uniform(-a, a) has variance a^2 / 3.
  const double sd_of_mean = a1 / std::sqrt(3.0 * m.w1.size());
  const double mean =
      std::accumulate(m.w1.begin(), m.w1.end(), 0.0) / m.w1.size();
  EXPECT_LT(std::abs(mean), 3.0 * sd_of_mean);
  for (double w : m.w1) EXPECT_LE(std::abs(w), a1);
  EXPECT_THAT(m.b1, Each(0.0));
  EXPECT_THAT(m.b2, Each(0.0));
}

TEST(ForwardLogitsTest, ZeroModelGivesZeroLogits) {
  const ModelParams m = ModelParams::Zeros(3, 5, 4);
  ASSERT_OK_AND_ASSIGN(std::vector<double> z, ForwardLogits(m, {{1.0, -2.0, 3.0}}));
  EXPECT_THAT(z, Each(0.0));
}

TEST(ForwardLogitsTest, HandComputedTinyNet) {
  ModelParams m = ModelParams::Zeros(1, 1, 1);
  m.w1 = {1.0};
  m.w2 = {2.0};
  m.b2 = {1.0};
  ASSERT_OK_AND_ASSIGN(std::vector<double> z, ForwardLogits(m, {{3.0}}));
  EXPECT_EQ(z, std::vector<double>{7.0});
  // The rectifier clips the negative pre-activation.
  ASSERT_OK_AND_ASSIGN(z, ForwardLogits(m, {{-3.0}}));
  EXPECT_EQ(z, std::vector<double>{1.0});
}

TEST(ForwardLogitsTest, RejectsBadInput) {
  const ModelParams m = ModelParams::Zeros(2, 2, 2);
  EXPECT_THAT(ForwardLogits(m, {{1.0}}),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(ForwardLogits(m, {{1.0, std::nan("")}}),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(SoftmaxTemperatureTest, KnownValues) {
  ASSERT_OK_AND_ASSIGN(std::vector<double> p,
                       SoftmaxTemperature({{0.0, 0.0}}, 3.0));
  EXPECT_EQ(p, (std::vector<double>{0.5, 0.5}));
  ASSERT_OK_AND_ASSIGN(p, SoftmaxTemperature({{std::log(2.0), 0.0}}, 1.0));
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  ASSERT_OK_AND_ASSIGN(p, SoftmaxTemperature({{10.0, 0.0}}, 10.0));
  ASSERT_OK_AND_ASSIGN(std::vector<double> q,
                       SoftmaxTemperature({{1.0, 0.0}}, 1.0));
  EXPECT_NEAR(p[0], q[0], 1e-15);
}

TEST(SoftmaxTemperatureTest, RejectsNonPositiveTemperature) {
  EXPECT_THAT(SoftmaxTemperature({{1.0, 2.0}}, 0.0),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(SoftmaxTemperature({{1.0, 2.0}}, -1.0),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(SoftmaxTemperatureTest, PropertySumsToOneAndShiftInvariant) {
  Gen gen(5);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z = gen.Normals(gen.Size(2, 12), 0.0, 20.0);
    const double h = std::exp(gen.Normal());
    ASSERT_OK_AND_ASSIGN(std::vector<double> p, SoftmaxTemperature(z, h));
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double shift = gen.Uniform(-100.0, 100.0);
    for (double& v : z) v += shift;
    ASSERT_OK_AND_ASSIGN(std::vector<double> q, SoftmaxTemperature(z, h));
    for (size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(SoftmaxTemperatureTest, TemperatureReversal) {
  EXPECT_LE(oracles::MaxTemperatureIdentityDiff(1000, 17), 1e-12);
}

class LossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Gen gen(21);
    model_ = ModelParams::Zeros(3, 5, 4);
    model_.ForEachParam([&](double& x) { x = gen.Normal(); });
    features_ = gen.Normals(6 * 3);
    labels_ = {0, 1, 2, 3, 1, 2};
    for (size_t i = 0; i < 6; ++i) {
      auto p = SoftmaxTemperature(gen.Normals(4), 1.0);
      soft_.insert(soft_.end(), p->begin(), p->end());
    }
  }
  TrainingData Data(LossMode mode) const {
    TrainingData d;
    d.features = features_;
    d.num_examples = 6;
    d.hard_labels = labels_;
    d.soft_targets = soft_;
    d.mode = mode;
    return d;
  }

  ModelParams model_;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<double> soft_;
};

TEST_F(LossTest, AnalyticGradientMatchesFiniteDifferences) {
  EXPECT_LT(oracles::MaxGradientRelError(50, 3), 1e-6);
}

TEST_F(LossTest, MixedLossBoundariesCollapseExactly) {
  TrainConfig cfg;
  cfg.temperature = 2.5;
  cfg.alpha = 0.0;
  ASSERT_OK_AND_ASSIGN(LossAndGradient mixed,
                       LossAndGrad(model_, Data(LossMode::kMixed), cfg));
  ASSERT_OK_AND_ASSIGN(LossAndGradient hard,
                       LossAndGrad(model_, Data(LossMode::kHard), cfg));
  EXPECT_EQ(mixed.loss, hard.loss);
  EXPECT_EQ(mixed.grad, hard.grad);

  cfg.alpha = 1.0;
  ASSERT_OK_AND_ASSIGN(mixed, LossAndGrad(model_, Data(LossMode::kMixed), cfg));
  ASSERT_OK_AND_ASSIGN(LossAndGradient soft,
                       LossAndGrad(model_, Data(LossMode::kSoft), cfg));
  EXPECT_EQ(mixed.loss, soft.loss);
  EXPECT_EQ(mixed.grad, soft.grad);
}

TEST_F(LossTest, OwnPredictionIsAFixedPoint) {
  TrainConfig cfg;
  cfg.temperature = 1.7;
  std::vector<double> own;
  for (size_t i = 0; i < 6; ++i) {
    auto z = ForwardLogits(model_, std::span(features_).subspan(3 * i, 3));
    auto p = SoftmaxTemperature(*z, cfg.temperature);
    own.insert(own.end(), p->begin(), p->end());
  }
  TrainingData d = Data(LossMode::kSoft);
  d.soft_targets = own;
  ASSERT_OK_AND_ASSIGN(LossAndGradient lg, LossAndGrad(model_, d, cfg));
  // Zero gradient at the logits implies zero output-bias gradient.
  for (double g : lg.grad.b2) EXPECT_NEAR(g, 0.0, 1e-15);
  for (double g : lg.grad.w2) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST_F(LossTest, RescaleDividesSoftLossByTemperatureSquared) {
  TrainConfig cfg;
  cfg.temperature = 3.0;
  ASSERT_OK_AND_ASSIGN(LossAndGradient plain,
                       LossAndGrad(model_, Data(LossMode::kSoft), cfg));
  cfg.gradient_rescale = true;
  ASSERT_OK_AND_ASSIGN(LossAndGradient scaled,
                       LossAndGrad(model_, Data(LossMode::kSoft), cfg));
  EXPECT_NEAR(scaled.loss, plain.loss / 9.0, 1e-14);
  EXPECT_NEAR(scaled.grad.b2[0], plain.grad.b2[0] / 9.0, 1e-14);
}

TEST_F(LossTest, RejectsUnnormalizedSoftTargets) {
  soft_[0] += 0.1;
  EXPECT_THAT(LossAndGrad(model_, Data(LossMode::kSoft), TrainConfig{}),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST_F(LossTest, RejectsOutOfRangeLabel) {
  labels_[2] = 4;
  EXPECT_THAT(LossAndGrad(model_, Data(LossMode::kHard), TrainConfig{}),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(TrainConfigTest, DefaultProfile) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.epochs, 20);
  EXPECT_EQ(cfg.learning_rate, 0.01);
  EXPECT_EQ(cfg.momentum, 0.99);
  EXPECT_OK(cfg.Validate());
}

TEST(TrainConfigTest, InvariantsEnforced) {
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_FALSE(cfg.Validate().ok());
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  EXPECT_FALSE(cfg.Validate().ok());
  cfg = TrainConfig{};
  cfg.temperature = 0.0;
  EXPECT_FALSE(cfg.Validate().ok());
  cfg = TrainConfig{};
  cfg.alpha = 1.5;
  EXPECT_FALSE(cfg.Validate().ok());
}

class SgdTest : public LossTest {};

TEST_F(SgdTest, ZeroLearningRateLeavesModelUnchanged) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  ASSERT_OK_AND_ASSIGN(ModelParams out,
                       SgdTrain(model_, Data(LossMode::kHard), cfg));
  EXPECT_EQ(out, model_);
}

TEST_F(SgdTest, DeterministicGivenSeed) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.momentum = 0.9;
  cfg.seed = 8;
  ASSERT_OK_AND_ASSIGN(ModelParams a, SgdTrain(model_, Data(LossMode::kMixed), cfg));
  ASSERT_OK_AND_ASSIGN(ModelParams b, SgdTrain(model_, Data(LossMode::kMixed), cfg));
  EXPECT_EQ(Flatten(a), Flatten(b));
  cfg.seed = 9;
  ASSERT_OK_AND_ASSIGN(ModelParams c, SgdTrain(model_, Data(LossMode::kMixed), cfg));
  EXPECT_NE(Flatten(a), Flatten(c));
}

TEST_F(SgdTest, EmptyDataRejected) {
  TrainingData d = Data(LossMode::kHard);
  d.num_examples = 0;
  d.features = {};
  d.hard_labels = {};
  EXPECT_THAT(SgdTrain(model_, d, TrainConfig{}),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST_F(SgdTest, FullBatchStepMatchesHandUpdate) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 6;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;
  ASSERT_OK_AND_ASSIGN(LossAndGradient lg,
                       LossAndGrad(model_, Data(LossMode::kHard), cfg));
  ASSERT_OK_AND_ASSIGN(ModelParams out,
                       SgdTrain(model_, Data(LossMode::kHard), cfg));
  const std::vector<double> before = Flatten(model_);
  const std::vector<double> grad = Flatten(lg.grad);
  const std::vector<double> after = Flatten(out);
  // One step from zero velocity: w - lr * g. Shuffling only reorders the sum.
  for (size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(after[i], before[i] - 0.1 * grad[i], 1e-13);
  }
}

TEST_F(SgdTest, LearnsSeparableData) {
  Gen gen(4);
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    x.push_back(gen.Normal(label ? 2.0 : -2.0, 0.5));
    x.push_back(gen.Normal());
    y.push_back(label);
  }
  TrainingData d;
  d.features = x;
  d.num_examples = y.size();
  d.hard_labels = y;
  ASSERT_OK_AND_ASSIGN(ModelParams m, InitModel(2, 8, 2, 1));
  TrainConfig cfg;
  cfg.batch_size = 16;
  ASSERT_OK_AND_ASSIGN(ModelParams trained, SgdTrain(m, d, cfg));
  EXPECT_GT(Accuracy(trained, x, y), 0.95);
  EXPECT_THAT(Flatten(trained), Not(Each(0.0)));
}

}  // namespace
}  // namespace distaudit
