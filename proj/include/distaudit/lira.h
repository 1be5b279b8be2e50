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

// Likelihood-ratio membership scoring. Each target example gets a Gaussian
// for the observations of shadow models that trained on it (IN) and one for
// the models that did not (OUT); a new model's observation is scored by the
// log of the IN/OUT density ratio.

#ifndef DISTAUDIT_LIRA_H_
#define DISTAUDIT_LIRA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "distaudit/data.h"
#include "distaudit/shadow.h"

namespace distaudit {

inline constexpr double kDefaultVarianceFloor = 1e-6;
inline constexpr size_t kDefaultQueryFilterK = 10;

// Means and (floored, maximum-likelihood) variances, in logit units.
struct GaussianPair {
  double mu_in = 0.0;
  double var_in = 1.0;
  double mu_out = 0.0;
  double var_out = 1.0;
  size_t n_in = 0;
  size_t n_out = 0;

  double sigma_in() const;
  double sigma_out() const;
  double MeanGap() const;
};

struct LiraOptions {
  // Lower bound on every fitted variance; 0 disables flooring.
  double variance_floor = kDefaultVarianceFloor;
  // Replace per-example variances by their average over all examples.
  bool global_variance = false;
};

// One membership score. `member` is 1 / 0 when the truth is known, else -1.
struct ScoreRecord {
  uint64_t example_id = 0;
  size_t model = 0;
  double score = 0.0;
  int member = -1;
  std::string family;
};

// Scalar observation per (model, example), e.g. the correct-class logit.
struct ObservationMatrix {
  size_t num_models = 0;
  size_t num_examples = 0;
  std::vector<double> values;   // num_models x num_examples
  std::vector<uint8_t> member;  // same shape
  std::vector<uint64_t> example_ids;

  double at(size_t model, size_t example) const {
    return values[model * num_examples + example];
  }
  bool is_member(size_t model, size_t example) const {
    return member[model * num_examples + example] != 0;
  }
};

// Sample means and MLE variances floored at `variance_floor`.
absl::StatusOr<GaussianPair> FitGaussianPair(
    std::span<const double> in_samples, std::span<const double> out_samples,
    double variance_floor = kDefaultVarianceFloor);

// log N(obs; mu_in, var_in) - log N(obs; mu_out, var_out), in nats.
double LogLr(const GaussianPair& pair, double obs);

// Logit of each probe's own label; labels are looked up by probe ID.
absl::StatusOr<ObservationMatrix> CorrectClassObservations(
    const LogitStore& store, const Dataset& dataset);

// Fits one pair per example from `calibration` and scores every
// (target model, example) cell. Calibration and targets must cover the same
// examples in the same order.
absl::StatusOr<std::vector<ScoreRecord>> DirectLira(
    const ObservationMatrix& calibration, const ObservationMatrix& targets,
    const LiraOptions& options, const std::string& family);

// Indices of the k pairs with the largest |mu_in - mu_out|, largest first,
// ties to the lower index. Returns every index when k >= pairs.size().
std::vector<size_t> MeanGapFilter(std::span<const GaussianPair> pairs,
                                  size_t k);

enum class LabelMode {
  kTeacherLabel,  // logit of the audited teacher example's label
  kStudentLabel,  // logit of each query's own label
};

struct StudentQueryOptions {
  size_t k = kDefaultQueryFilterK;
  bool filter = true;
  LabelMode label_mode = LabelMode::kTeacherLabel;
  LiraOptions lira;
};

struct StudentQueryResult {
  // One record per (target model, teacher pool example), model-major.
  std::vector<ScoreRecord> records;
  // Per teacher pool example, the query indices that were scored, most
  // informative first.
  std::vector<std::vector<size_t>> selected;
};

// Scores teacher-pool membership from the teacher's logits on student
// queries only. `calibration` holds shadow teachers probed on the queries,
// with teacher-pool membership in `calibration_plan`; `targets` holds the
// audited teachers' logits on the same queries. `target_plan`, when given,
// supplies the true membership of each target. Per-query log-LRs of the
// selected queries are summed.
absl::StatusOr<StudentQueryResult> StudentQueryAttack(
    const LogitStore& calibration, const MembershipPlan& calibration_plan,
    std::span<const int> teacher_labels, std::span<const int> query_labels,
    const LogitStore& targets, const MembershipPlan* target_plan,
    const StudentQueryOptions& options, const std::string& family);

// Single audited teacher given as its query dataset; truth unknown.
absl::StatusOr<StudentQueryResult> StudentQueryAttack(
    const LogitStore& calibration, const MembershipPlan& calibration_plan,
    std::span<const int> teacher_labels, const QueryDataset& target,
    const StudentQueryOptions& options);

// Raw observation as the score, no calibration.
std::vector<ScoreRecord> LogitThresholdBaseline(
    const ObservationMatrix& targets, const std::string& family);

// Logits recovered from probabilities up to a per-row constant:
// log p minus the mean of log p.
std::vector<double> LogitsFromProbabilities(std::span<const double> probs);

}  // namespace distaudit

#endif  // DISTAUDIT_LIRA_H_
