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

#ifndef DISTAUDIT_EXPERIMENTS_H_
#define DISTAUDIT_EXPERIMENTS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distaudit/config.h"
#include "distaudit/data.h"
#include "distaudit/distill.h"
#include "distaudit/lira.h"
#include "distaudit/metrics.h"
#include "distaudit/shadow.h"
#include "nlohmann/json.hpp"

namespace distaudit {

inline constexpr double kReportedFprs[] = {1e-4, 1e-3, 1e-2, 1e-1};

struct FamilyResult {
  std::string family;
  RocCurve roc;
  // (FPR budget, TPR) for each of kReportedFprs.
  std::vector<std::pair<double, double>> tpr_at_fpr;
};

struct PerExampleRow {
  uint64_t id = 0;
  std::optional<double> teacher_acc;
  std::optional<double> student_acc;
  size_t n_in = 0;
  size_t n_out = 0;
};

struct PopulationInfo {
  std::string name;
  std::string family;
  size_t models = 0;
  size_t probes = 0;
  uint64_t master_seed = 0;
};

struct AttackReport {
  std::string experiment;
  std::vector<FamilyResult> families;
  std::vector<PerExampleRow> per_example;
  // Named scalar results, e.g. "auc_teacher" or "spearman".
  std::map<std::string, double> metrics;
  // Experiment-specific structured results.
  nlohmann::json details = nlohmann::json::object();
  std::vector<PopulationInfo> populations;
  // Models trained outside shadow populations (fixed teachers).
  size_t extra_models = 0;
  std::string config_echo;
  uint64_t master_seed = 0;
  size_t calibration_models = 0;
  size_t evaluation_models = 0;
  // Not part of report.json, which must be reproducible byte for byte.
  double wall_seconds = 0.0;

  const FamilyResult* Family(const std::string& name) const;
  double Metric(const std::string& name) const;
  size_t ModelsUsed() const;
};

// A trained shadow population. Models [0, C) calibrate; models [C, C + E)
// are attacked. Calibration-only populations hold C models.
struct Population {
  std::string name;
  ShadowRunSpec spec;
  LogitStore store;
  size_t calibration_models = 0;
  double seconds = 0.0;

  LogitStore Calibration() const;
  LogitStore Evaluation() const;
  MembershipPlan CalibrationPlan() const;
  MembershipPlan EvaluationPlan() const;
  PopulationInfo Info() const;
};

// Shared data, splits and a cache of shadow populations. Populations are
// deterministic functions of their run spec, so experiments that need the
// same population share one copy.
class ExperimentContext {
 public:
  static absl::StatusOr<std::unique_ptr<ExperimentContext>> Create(
      ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  std::shared_ptr<const Dataset> dataset() const { return dataset_; }
  const SplitSpec& split() const { return split_; }
  std::span<const uint64_t> surrogate_ids() const { return surrogate_ids_; }
  std::span<const uint64_t> test_ids() const { return test_ids_; }

  // Training settings from the config; seeds are filled in per model.
  PipelineConfig BasePipeline() const;

  // Returns the cached population `name`, or plans it with `plan`, trains
  // its first `models` models (all when 0) and caches it.
  absl::StatusOr<const Population*> GetPopulation(
      const std::string& name,
      const std::function<absl::StatusOr<ShadowRunSpec>()>& plan,
      size_t models = 0);

  // Teacher-only population on the main split, probed on the teacher pool,
  // the student pool and the test set, in that order.
  absl::StatusOr<const Population*> TeacherPopulation();
  // End-to-end population at temperature h, probed on the teacher pool and
  // the test set.
  absl::StatusOr<const Population*> EndToEndPopulation(double h);

  // Total shadow models trained so far by this context.
  size_t models_trained() const { return models_trained_; }
  // Every population built so far, by name.
  const std::map<std::string, std::unique_ptr<Population>>& populations()
      const {
    return cache_;
  }

 private:
  ExperimentContext() = default;

  ExperimentConfig config_;
  std::shared_ptr<const Dataset> dataset_;
  SplitSpec split_;
  std::vector<uint64_t> surrogate_ids_;
  std::vector<uint64_t> test_ids_;
  std::map<std::string, std::unique_ptr<Population>> cache_;
  size_t models_trained_ = 0;
};

// Deployed, candidate and surrogate teachers for the private-student
// setting: the deployed teacher alone for kKnown, the candidate set (the
// deployed teacher first) for kCandidateSet, and teachers trained on the
// surrogate split for kSurrogate.
absl::StatusOr<std::vector<ModelParams>> PrivateStudentTeachers(
    const ExperimentContext& ctx, TeacherKnowledge knowledge);

// The probe set used when a family is trained on its own: the teacher pool,
// the teacher pool followed by the student pool (student-query), or the
// student pool (private-student).
std::vector<uint64_t> StandaloneProbes(const ExperimentContext& ctx,
                                       ShadowFamily family);

// Plans a standalone population of `family` on the context's data.
absl::StatusOr<ShadowRunSpec> PlanFamilyRuns(const ExperimentContext& ctx,
                                             ShadowFamily family,
                                             size_t num_models,
                                             uint64_t master_seed,
                                             TeacherKnowledge knowledge);

// Picks `count` IDs spread evenly over the deciles of `vulnerability`
// (ascending), sampling within each decile with `seed`.
absl::StatusOr<std::vector<uint64_t>> SelectStratifiedTargets(
    std::span<const uint64_t> ids, std::span<const double> vulnerability,
    size_t count, uint64_t seed);

// ROC and TPR table for one attack family.
absl::StatusOr<FamilyResult> ScoreFamily(
    const std::string& family, std::span<const ScoreRecord> records);

absl::StatusOr<AttackReport> ExpTeacherPrivacy(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpStudentQuery(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpDuplication(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpPoisoning(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpTemperature(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpPrivateStudent(ExperimentContext& ctx);
absl::StatusOr<AttackReport> ExpSelfDistill(ExperimentContext& ctx);

// teacher-privacy, student-query, duplication, poisoning, temperature,
// private-student, self-distill.
const std::vector<std::string>& ExperimentNames();

// Unknown names are InvalidArgument errors listing the valid ones.
absl::StatusOr<AttackReport> RunExperiment(const std::string& name,
                                           ExperimentContext& ctx);

nlohmann::json ReportToJson(const AttackReport& report);

// Writes report.json, roc_<family>.csv, per_example.csv and config.echo
// into `dir`, creating it if needed. With a context and save_stores set,
// the report's populations are also written under dir/stores.
absl::Status WriteReport(const AttackReport& report, const std::string& dir,
                         const ExperimentContext* ctx = nullptr);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double v);

}  // namespace distaudit

#endif  // DISTAUDIT_EXPERIMENTS_H_
