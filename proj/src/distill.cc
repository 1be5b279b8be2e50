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

#include "distaudit/distill.h"

#include <algorithm>

#include "absl/strings/str_format.h"
#include "distaudit/seeding.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

constexpr uint64_t kInitStream = 1;

absl::StatusOr<ModelParams> FreshModel(size_t dim, size_t classes,
                                       const TrainConfig& config) {
  return InitModel(dim, config.hidden_width, classes,
                   DeriveSeed(config.seed, kInitStream));
}

}  // namespace

absl::StatusOr<ModelParams> TrainTeacher(const Subset& data, size_t classes,
                                         const TrainConfig& config) {
  if (data.size() == 0) {
    return absl::InvalidArgumentError("TrainTeacher: empty teacher data");
  }
  const size_t dim = data.features.size() / data.size();
  DISTAUDIT_ASSIGN_OR_RETURN(ModelParams model,
                             FreshModel(dim, classes, config));
  TrainingData td;
  td.features = data.features;
  td.num_examples = data.size();
  td.hard_labels = data.labels;
  td.mode = LossMode::kHard;
  return SgdTrain(std::move(model), td, config);
}

absl::StatusOr<QueryDataset> MakeQueryDataset(const ModelParams& teacher,
                                              const Subset& student,
                                              double temperature) {
  if (!(temperature > 0.0)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "MakeQueryDataset: temperature must be > 0, got %g", temperature));
  }
  QueryDataset q;
  q.dim = teacher.input_dim;
  q.classes = teacher.classes;
  q.temperature = temperature;
  q.ids = student.ids;
  q.features = student.features;
  q.hard_labels = student.labels;
  DISTAUDIT_ASSIGN_OR_RETURN(q.raw_logits,
                             BatchLogits(teacher, student.features));
  q.soft_targets.resize(q.raw_logits.size());
  const size_t c = q.classes;
  for (size_t i = 0; i < q.size(); ++i) {
    SoftmaxTemperatureInto(
        std::span<const double>(q.raw_logits).subspan(i * c, c), temperature,
        std::span<double>(q.soft_targets).subspan(i * c, c));
  }
  return q;
}

absl::StatusOr<ModelParams> TrainStudent(const QueryDataset& query,
                                         const TrainConfig& config,
                                         LossMode mode) {
  if (query.size() == 0) {
    return absl::InvalidArgumentError("TrainStudent: empty query dataset");
  }
  TrainConfig cfg = config;
  cfg.temperature = query.temperature;
  DISTAUDIT_ASSIGN_OR_RETURN(ModelParams model,
                             FreshModel(query.dim, query.classes, cfg));
  TrainingData td;
  td.features = query.features;
  td.num_examples = query.size();
  td.soft_targets = query.soft_targets;
  td.hard_labels = query.hard_labels;
  td.mode = mode;
  return SgdTrain(std::move(model), td, cfg);
}

absl::StatusOr<PipelineOutput> DistillFrom(const ModelParams& teacher,
                                           const Subset& student,
                                           const TrainConfig& student_config) {
  PipelineOutput out;
  out.teacher = teacher;
  out.config.student = student_config;
  DISTAUDIT_ASSIGN_OR_RETURN(
      out.query,
      MakeQueryDataset(teacher, student, student_config.temperature));
  DISTAUDIT_ASSIGN_OR_RETURN(out.student,
                             TrainStudent(out.query, student_config));
  return out;
}

absl::StatusOr<PipelineOutput> RunPipeline(const Dataset& dataset,
                                           const SplitSpec& split,
                                           std::span<const uint64_t> member_ids,
                                           const PipelineConfig& config) {
  PipelineOutput out;
  out.config = config;
  out.config.student.seed = config.teacher.seed + kStudentSeedOffset;

  std::vector<uint64_t> teacher_ids(member_ids.begin(), member_ids.end());
  teacher_ids.insert(teacher_ids.end(), config.teacher_fixed_ids.begin(),
                     config.teacher_fixed_ids.end());
  DISTAUDIT_ASSIGN_OR_RETURN(Subset teacher_data, dataset.Gather(teacher_ids));
  DISTAUDIT_ASSIGN_OR_RETURN(
      out.teacher,
      TrainTeacher(teacher_data, dataset.classes(), config.teacher));

  if (config.mode == PipelineMode::kSelfDistill) {
    DISTAUDIT_ASSIGN_OR_RETURN(Subset shared, dataset.Gather(member_ids));
    DISTAUDIT_ASSIGN_OR_RETURN(
        out.query, MakeQueryDataset(out.teacher, shared,
                                    out.config.student.temperature));
    DISTAUDIT_ASSIGN_OR_RETURN(
        out.student,
        TrainStudent(out.query, out.config.student, LossMode::kMixed));
    return out;
  }

  DISTAUDIT_ASSIGN_OR_RETURN(Subset student_data,
                             dataset.Gather(split.student_ids));
  DISTAUDIT_ASSIGN_OR_RETURN(
      out.query, MakeQueryDataset(out.teacher, student_data,
                                  out.config.student.temperature));
  DISTAUDIT_ASSIGN_OR_RETURN(out.student,
                             TrainStudent(out.query, out.config.student));
  return out;
}

}  // namespace distaudit
