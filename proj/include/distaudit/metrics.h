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

#ifndef DISTAUDIT_METRICS_H_
#define DISTAUDIT_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "distaudit/lira.h"

namespace distaudit {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  // Points at or above this score are predicted members.
  double threshold = 0.0;
};

struct RocCurve {
  // From (0, 0) to (1, 1), one point per distinct score.
  std::vector<RocPoint> points;
  double auc = 0.0;
  size_t num_scores = 0;
  size_t positives = 0;
  size_t negatives = 0;
};

// Higher scores mean "member". Tied scores are swept together, which makes
// the AUC equal to the Mann-Whitney estimate with ties counted as 1/2.
absl::StatusOr<RocCurve> ComputeRoc(std::span<const ScoreRecord> records);
absl::StatusOr<RocCurve> ComputeRoc(std::span<const double> scores,
                                    std::span<const int> members);

// Largest TPR over curve points with FPR <= max_fpr.
double TprAtFpr(const RocCurve& curve, double max_fpr);

struct ExampleAccuracy {
  uint64_t example_id = 0;
  size_t n_in = 0;
  size_t n_out = 0;
  // Fraction of target models on which "score > 0" matched membership.
  double accuracy = 0.0;
  double standard_error = 0.0;
};

// Per example, in order of first appearance. Examples never seen both IN
// and OUT are rejected.
absl::StatusOr<std::vector<ExampleAccuracy>> PerExampleAccuracy(
    std::span<const ScoreRecord> records);

// Spearman rank correlation with average ranks for ties.
absl::StatusOr<double> Spearman(std::span<const double> x,
                                std::span<const double> y);

struct ChowResult {
  double f_statistic = 0.0;
  double p_value = 1.0;
  size_t df1 = 2;
  size_t df2 = 0;
};

// Tests whether y ~ a + b x has the same coefficients in both groups.
absl::StatusOr<ChowResult> ChowTest(std::span<const double> x1,
                                    std::span<const double> y1,
                                    std::span<const double> x2,
                                    std::span<const double> y2);

// Upper tail of the F(d1, d2) distribution.
double FSurvival(double f, double d1, double d2);

// One-sided exact binomial p-value for at least `wins` successes out of
// wins + losses fair coin flips.
double SignTestPValue(size_t wins, size_t losses);

}  // namespace distaudit

#endif  // DISTAUDIT_METRICS_H_
