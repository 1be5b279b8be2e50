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

#include "distaudit/lira.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "distaudit/data.h"
#include "distaudit/metrics.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "test_util.h"

namespace distaudit {
namespace {

using ::distaudit::testing::Gen;
using ::distaudit::testing::StatusIs;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

GaussianPair Pair(double mu_in, double var_in, double mu_out, double var_out) {
  GaussianPair g;
  g.mu_in = mu_in;
  g.var_in = var_in;
  g.mu_out = mu_out;
  g.var_out = var_out;
  return g;
}

TEST(FitGaussianPairTest, ClosedFormCases) {
  ASSERT_OK_AND_ASSIGN(GaussianPair g, FitGaussianPair({{1.0, 3.0}},
                                                       {{0.0, 0.0, 3.0}}));
  EXPECT_EQ(g.mu_in, 2.0);
  EXPECT_EQ(g.var_in, 1.0);
  EXPECT_EQ(g.mu_out, 1.0);
  EXPECT_EQ(g.var_out, 2.0);
  EXPECT_EQ(g.n_in, 2u);
  EXPECT_EQ(g.n_out, 3u);
  EXPECT_EQ(g.MeanGap(), 1.0);
}

TEST(FitGaussianPairTest, DegenerateVarianceIsFloored) {
  ASSERT_OK_AND_ASSIGN(GaussianPair g,
                       FitGaussianPair({{2.0, 2.0, 2.0}}, {{0.0, 1.0}}));
  EXPECT_EQ(g.mu_in, 2.0);
  EXPECT_EQ(g.var_in, 1e-6);
  ASSERT_OK_AND_ASSIGN(g, FitGaussianPair({{2.0, 2.0}}, {{0.0, 1.0}}, 0.0));
  EXPECT_EQ(g.var_in, 0.0);
}

TEST(FitGaussianPairTest, NeedsTwoSamplesEachSide) {
  EXPECT_THAT(FitGaussianPair({{1.0}}, {{0.0, 1.0}}),
              StatusIs(absl::StatusCode::kFailedPrecondition));
  EXPECT_THAT(FitGaussianPair({{1.0, 2.0}}, {}),
              StatusIs(absl::StatusCode::kFailedPrecondition));
}

TEST(FitGaussianPairTest, MatchesClosedFormMle) {
  EXPECT_LE(oracles::MaxGaussianFitError(100, 1), 1e-12);
}

TEST(FitGaussianPairTest, PropertyPermutationInvariant) {
  Gen gen(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> in = gen.Normals(gen.Size(2, 30), 1.0, 2.0);
    std::vector<double> out = gen.Normals(gen.Size(2, 30));
    ASSERT_OK_AND_ASSIGN(GaussianPair a, FitGaussianPair(in, out));
    std::shuffle(in.begin(), in.end(), gen.rng());
    std::shuffle(out.begin(), out.end(), gen.rng());
    ASSERT_OK_AND_ASSIGN(GaussianPair b, FitGaussianPair(in, out));
    EXPECT_NEAR(a.mu_in, b.mu_in, 1e-13);
    EXPECT_NEAR(a.var_in, b.var_in, 1e-12);
    EXPECT_NEAR(a.mu_out, b.mu_out, 1e-13);
    EXPECT_NEAR(a.var_out, b.var_out, 1e-12);
  }
}

TEST(LogLrTest, AnalyticCases) {
  const GaussianPair g = Pair(1.0, 1.0, -1.0, 1.0);
  EXPECT_EQ(LogLr(g, 1.0), 2.0);
  EXPECT_EQ(LogLr(g, 0.0), 0.0);
  const GaussianPair same = Pair(0.3, 2.0, 0.3, 2.0);
  for (double obs : {-5.0, 0.0, 0.3, 7.0}) EXPECT_EQ(LogLr(same, obs), 0.0);
}

TEST(LogLrTest, MatchesNormalDensities) {
  EXPECT_LE(oracles::MaxLogLrError(1000, 2), 1e-12);
}

TEST(LogLrTest, PropertyMonotoneWithEqualVariances) {
  Gen gen(9);
  for (int t = 0; t < 200; ++t) {
    const double mu_out = gen.Normal();
    const double var = std::exp(gen.Normal());
    const GaussianPair g = Pair(mu_out + gen.Uniform(0.01, 3.0), var, mu_out,
                                var);
    const double a = gen.Normal(0.0, 3.0);
    const double b = a + gen.Uniform(1e-3, 2.0);
    EXPECT_LT(LogLr(g, a), LogLr(g, b));
  }
}

ObservationMatrix Matrix(size_t models, size_t examples,
                         std::vector<double> values,
                         std::vector<uint8_t> member) {
  ObservationMatrix m;
  m.num_models = models;
  m.num_examples = examples;
  m.values = std::move(values);
  m.member = std::move(member);
  for (size_t e = 0; e < examples; ++e) m.example_ids.push_back(10 + e);
  return m;
}

TEST(DirectLiraTest, MidpointScoresZero) {
  // One example, IN at {0, 2}, OUT at {-2, 0}: means 1 and -1, variance 1.
  const ObservationMatrix cal =
      Matrix(4, 1, {0.0, 2.0, -2.0, 0.0}, {1, 1, 0, 0});
  const ObservationMatrix tgt = Matrix(2, 1, {0.0, 1.0}, {0, 1});
  ASSERT_OK_AND_ASSIGN(auto records, DirectLira(cal, tgt, LiraOptions{}, "f"));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].score, 0.0);
  EXPECT_EQ(records[0].member, 0);
  EXPECT_EQ(records[1].score, 2.0);
  EXPECT_EQ(records[1].member, 1);
  EXPECT_EQ(records[1].example_id, 10u);
  EXPECT_EQ(records[1].family, "f");
}

TEST(DirectLiraTest, CoverageViolationNamesExample) {
  const ObservationMatrix cal =
      Matrix(3, 2, {0, 0, 1, 1, 2, 2}, {1, 0, 1, 1, 0, 0});
  const ObservationMatrix tgt = Matrix(1, 2, {0, 0}, {0, 0});
  const auto r = DirectLira(cal, tgt, LiraOptions{}, "f");
  EXPECT_THAT(r, StatusIs(absl::StatusCode::kFailedPrecondition));
  EXPECT_THAT(std::string(r.status().message()), HasSubstr("example 10"));
}

TEST(DirectLiraTest, ScaleInvariantWithoutFloor) {
  EXPECT_LE(oracles::MaxScaleInvarianceDiff(4, 3.7), 1e-9);
  EXPECT_LE(oracles::MaxScaleInvarianceDiff(5, 0.01), 1e-9);
}

TEST(DirectLiraTest, GlobalVarianceAveragesOverExamples) {
  // Example 0 variances 1 / 1, example 1 variances 4 / 4.
  const ObservationMatrix cal = Matrix(
      4, 2, {0.0, 0.0, 2.0, 4.0, -2.0, -4.0, 0.0, 0.0}, {1, 1, 1, 1, 0, 0, 0, 0});
  const ObservationMatrix tgt = Matrix(1, 2, {1.0, 2.0}, {1, 1});
  LiraOptions opt;
  opt.global_variance = true;
  ASSERT_OK_AND_ASSIGN(auto records, DirectLira(cal, tgt, opt, "g"));
  const GaussianPair g0 = Pair(1.0, 2.5, -1.0, 2.5);
  const GaussianPair g1 = Pair(2.0, 2.5, -2.0, 2.5);
  EXPECT_NEAR(records[0].score, oracles::NormalLogLr(g0, 1.0), 1e-12);
  EXPECT_NEAR(records[1].score, oracles::NormalLogLr(g1, 2.0), 1e-12);
}

TEST(MeanGapFilterTest, TopKWithLowIndexTieBreak) {
  const std::vector<GaussianPair> pairs = {
      Pair(3, 1, 0, 1), Pair(0, 1, 1, 1), Pair(0, 1, -2, 1)};
  EXPECT_THAT(MeanGapFilter(pairs, 2), ElementsAre(0u, 2u));
  EXPECT_THAT(MeanGapFilter(pairs, 10), ElementsAre(0u, 2u, 1u));
  const std::vector<GaussianPair> tied = {
      Pair(1, 1, 0, 1), Pair(0, 1, 1, 1), Pair(2, 1, 0, 1), Pair(0, 1, 1, 1)};
  EXPECT_THAT(MeanGapFilter(tied, 3), ElementsAre(2u, 0u, 1u));
}

TEST(MeanGapFilterTest, PropertyMatchesStableSort) {
  Gen gen(10);
  for (int t = 0; t < 100; ++t) {
    std::vector<GaussianPair> pairs(gen.Size(1, 30));
    for (auto& p : pairs) p = Pair(gen.Int(-3, 3), 1, gen.Int(-3, 3), 1);
    const size_t k = gen.Size(1, 35);
    std::vector<size_t> expect(pairs.size());
    std::iota(expect.begin(), expect.end(), size_t{0});
    std::stable_sort(expect.begin(), expect.end(), [&](size_t a, size_t b) {
      return pairs[a].MeanGap() > pairs[b].MeanGap();
    });
    expect.resize(std::min(k, pairs.size()));
    EXPECT_EQ(MeanGapFilter(pairs, k), expect);
  }
}

// A random teacher population probed on `queries` student examples, with
// membership over a separate pool of `pool` teacher examples.
struct QueryFixture {
  LogitStore calibration;
  LogitStore targets;
  MembershipPlan plan;
  MembershipPlan target_plan;
  std::vector<int> teacher_labels;
  std::vector<int> query_labels;
};

QueryFixture MakeQueryFixture(uint64_t seed, size_t models, size_t pool,
                              size_t queries, size_t classes) {
  Gen gen(seed);
  QueryFixture f;
  std::vector<uint64_t> pool_ids(pool);
  std::iota(pool_ids.begin(), pool_ids.end(), uint64_t{0});
  f.plan = *SampleMembershipPlan(pool_ids, models, seed);
  f.target_plan = *SampleMembershipPlan(pool_ids, 6, seed + 1);
  auto fill = [&](LogitStore& s, size_t n, const MembershipPlan& plan) {
    s.family = ShadowFamily::kStudentQuery;
    s.num_models = n;
    s.num_probe = queries;
    s.num_classes = classes;
    s.membership.assign(n * queries, 0);
    for (size_t q = 0; q < queries; ++q) s.probe_ids.push_back(500 + q);
    for (size_t m = 0; m < n; ++m) {
      for (size_t q = 0; q < queries; ++q) {
        for (size_t c = 0; c < classes; ++c) {
          // Query q carries signal about pool example q % pool.
          const double shift = plan.IsIn(m, q % pool) ? 1.0 + 0.1 * c : 0.0;
          s.logits.push_back(static_cast<float>(shift + gen.Normal()));
        }
      }
    }
  };
  fill(f.calibration, models, f.plan);
  fill(f.targets, 6, f.target_plan);
  for (size_t j = 0; j < pool; ++j) {
    f.teacher_labels.push_back(gen.Int(0, classes - 1));
  }
  for (size_t q = 0; q < queries; ++q) {
    f.query_labels.push_back(gen.Int(0, classes - 1));
  }
  return f;
}

// Direct transcription of the attack: per (teacher example, query) pair a
// fitted Gaussian, top-k mean gaps, summed log-LRs.
std::vector<double> NaiveQueryScores(const QueryFixture& f, size_t k,
                                     bool filter, bool teacher_label) {
  const size_t q = f.calibration.num_probe;
  std::vector<double> scores;
  for (size_t t = 0; t < f.targets.num_models; ++t) {
    for (size_t j = 0; j < f.plan.pool_size(); ++j) {
      std::vector<std::pair<double, size_t>> gaps;
      std::vector<GaussianPair> pairs;
      for (size_t i = 0; i < q; ++i) {
        const size_t c = teacher_label ? f.teacher_labels[j] : f.query_labels[i];
        std::vector<double> in, out;
        for (size_t m = 0; m < f.calibration.num_models; ++m) {
          (f.plan.IsIn(m, j) ? in : out).push_back(f.calibration.Logit(m, i, c));
        }
        pairs.push_back(*FitGaussianPair(in, out));
        gaps.emplace_back(-std::abs(pairs.back().mu_in - pairs.back().mu_out), i);
      }
      std::sort(gaps.begin(), gaps.end());
      const size_t keep = filter ? std::min(k, q) : q;
      double score = 0.0;
      for (size_t r = 0; r < keep; ++r) {
        const size_t i = gaps[r].second;
        const size_t c = teacher_label ? f.teacher_labels[j] : f.query_labels[i];
        score += oracles::NormalLogLr(pairs[i], f.targets.Logit(t, i, c));
      }
      scores.push_back(score);
    }
  }
  return scores;
}

TEST(StudentQueryAttackTest, MatchesNaiveTranscription) {
  const QueryFixture f = MakeQueryFixture(3, 12, 5, 15, 3);
  for (bool teacher_label : {true, false}) {
    for (bool filter : {true, false}) {
      StudentQueryOptions opt;
      opt.k = 4;
      opt.filter = filter;
      opt.label_mode =
          teacher_label ? LabelMode::kTeacherLabel : LabelMode::kStudentLabel;
      ASSERT_OK_AND_ASSIGN(
          StudentQueryResult r,
          StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                             f.query_labels, f.targets, &f.target_plan, opt,
                             "sq"));
      const std::vector<double> expect =
          NaiveQueryScores(f, 4, filter, teacher_label);
      ASSERT_EQ(r.records.size(), expect.size());
      for (size_t i = 0; i < expect.size(); ++i) {
        EXPECT_NEAR(r.records[i].score, expect[i], 1e-9) << i;
      }
      const size_t pool = f.plan.pool_size();
      EXPECT_EQ(r.records[pool + 2].model, 1u);
      EXPECT_EQ(r.records[pool + 2].example_id, 2u);
      EXPECT_EQ(r.records[pool + 2].member, f.target_plan.IsIn(1, 2));
      EXPECT_EQ(r.selected[0].size(), filter ? 4u : 15u);
    }
  }
}

TEST(StudentQueryAttackTest, KOneIsTheSingleBestQuery) {
  const QueryFixture f = MakeQueryFixture(5, 10, 4, 8, 2);
  StudentQueryOptions opt;
  opt.k = 1;
  ASSERT_OK_AND_ASSIGN(
      StudentQueryResult r,
      StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                         f.query_labels, f.targets, nullptr, opt, "sq"));
  for (size_t j = 0; j < 4; ++j) {
    ASSERT_EQ(r.selected[j].size(), 1u);
    const size_t i = r.selected[j][0];
    std::vector<double> in, out;
    for (size_t m = 0; m < 10; ++m) {
      (f.plan.IsIn(m, j) ? in : out)
          .push_back(f.calibration.Logit(m, i, f.teacher_labels[j]));
    }
    ASSERT_OK_AND_ASSIGN(GaussianPair g, FitGaussianPair(in, out));
    EXPECT_NEAR(r.records[j].score,
                LogLr(g, f.targets.Logit(0, i, f.teacher_labels[j])), 1e-12);
    EXPECT_EQ(r.records[j].member, -1);
  }
}

TEST(StudentQueryAttackTest, AggregateIsSumOfSingleQueryScores) {
  const QueryFixture f = MakeQueryFixture(6, 10, 3, 9, 2);
  StudentQueryOptions all;
  all.filter = false;
  ASSERT_OK_AND_ASSIGN(
      StudentQueryResult r,
      StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                         f.query_labels, f.targets, nullptr, all, "sq"));
  for (size_t j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (size_t i = 0; i < 9; ++i) {
      std::vector<double> in, out;
      for (size_t m = 0; m < 10; ++m) {
        (f.plan.IsIn(m, j) ? in : out)
            .push_back(f.calibration.Logit(m, i, f.teacher_labels[j]));
      }
      sum += LogLr(*FitGaussianPair(in, out),
                   f.targets.Logit(0, i, f.teacher_labels[j]));
    }
    EXPECT_NEAR(r.records[j].score, sum, 1e-10);
  }
}

TEST(StudentQueryAttackTest, ValidatesInputs) {
  const QueryFixture f = MakeQueryFixture(7, 8, 3, 6, 2);
  StudentQueryOptions opt;
  opt.k = 0;
  EXPECT_THAT(StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                                 f.query_labels, f.targets, nullptr, opt, "x"),
              StatusIs(absl::StatusCode::kInvalidArgument));
  opt.k = 2;
  LogitStore shifted = f.targets;
  shifted.probe_ids[0] = 9999;
  EXPECT_THAT(StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                                 f.query_labels, shifted, nullptr, opt, "x"),
              StatusIs(absl::StatusCode::kInvalidArgument));
  const std::vector<int> short_labels = {0};
  EXPECT_THAT(StudentQueryAttack(f.calibration, f.plan, short_labels,
                                 f.query_labels, f.targets, nullptr, opt, "x"),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(StudentQueryAttackTest, QueryDatasetOverloadUsesRawLogits) {
  const QueryFixture f = MakeQueryFixture(8, 8, 3, 6, 2);
  QueryDataset q;
  q.classes = 2;
  q.ids = f.calibration.probe_ids;
  q.hard_labels = f.query_labels;
  const auto logits = f.targets.ModelLogits(0);
  q.raw_logits.assign(logits.begin(), logits.end());
  StudentQueryOptions opt;
  opt.k = 3;
  ASSERT_OK_AND_ASSIGN(StudentQueryResult a,
                       StudentQueryAttack(f.calibration, f.plan,
                                          f.teacher_labels, q, opt));
  ASSERT_OK_AND_ASSIGN(
      StudentQueryResult b,
      StudentQueryAttack(f.calibration, f.plan, f.teacher_labels,
                         f.query_labels, f.targets, nullptr, opt, "x"));
  for (size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(a.records[j].score, b.records[j].score);
  }
  q.ids[0] = 12345;
  EXPECT_THAT(
      StudentQueryAttack(f.calibration, f.plan, f.teacher_labels, q, opt),
      StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(BaselineTest, ScoreIsRawObservation) {
  const ObservationMatrix tgt =
      Matrix(2, 2, {5.0, -1.0, 0.5, 2.0}, {1, 0, 0, 1});
  const std::vector<ScoreRecord> r = LogitThresholdBaseline(tgt, "b");
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].score, 5.0);
  EXPECT_EQ(r[3].score, 2.0);
  EXPECT_EQ(r[3].member, 1);
  ASSERT_OK_AND_ASSIGN(RocCurve roc, ComputeRoc(r));
  EXPECT_EQ(roc.auc, 1.0);
}

TEST(BaselineTest, IdenticalDistributionsNearChance) {
  Gen gen(11);
  const size_t n = 4000;
  std::vector<double> v = gen.Normals(n);
  std::vector<uint8_t> m(n);
  for (auto& b : m) b = gen.Int(0, 1);
  const ObservationMatrix tgt = Matrix(1, n, v, m);
  ASSERT_OK_AND_ASSIGN(RocCurve roc, ComputeRoc(LogitThresholdBaseline(tgt, "b")));
  EXPECT_NEAR(roc.auc, 0.5, 0.05);
}

TEST(LogitsFromProbabilitiesTest, RecoversLogitsUpToAConstant) {
  Gen gen(12);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> z = gen.Normals(gen.Size(2, 10), 0.0, 3.0);
    std::vector<double> p(z.size());
    SoftmaxTemperatureInto(z, 1.0, p);
    const std::vector<double> back = LogitsFromProbabilities(p);
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / z.size();
    for (size_t i = 0; i < z.size(); ++i) {
      EXPECT_NEAR(back[i], z[i] - mean, 1e-9);
    }
  }
}

}  // namespace
}  // namespace distaudit
