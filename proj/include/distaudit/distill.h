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

// Teacher -> query dataset -> student, and the self-distillation variant
// where the student also sees the original hard labels.

#ifndef DISTAUDIT_DISTILL_H_
#define DISTAUDIT_DISTILL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "distaudit/data.h"
#include "distaudit/nn.h"

namespace distaudit {

// The student seed is the teacher seed plus this offset.
inline constexpr uint64_t kStudentSeedOffset = 0x5eed;

// Student inputs with the teacher's raw logits and temperature-scaled
// softmax. Both are kept so attacks can read logits directly.
struct QueryDataset {
  size_t dim = 0;
  size_t classes = 0;
  double temperature = 1.0;
  std::vector<uint64_t> ids;
  std::vector<double> features;      // n x dim
  std::vector<int> hard_labels;      // original labels of the student rows
  std::vector<double> raw_logits;    // n x classes
  std::vector<double> soft_targets;  // n x classes

  size_t size() const { return ids.size(); }
};

enum class PipelineMode { kStandard, kSelfDistill };

struct PipelineConfig {
  TrainConfig teacher;
  // Temperature, alpha and gradient_rescale of the distillation step live
  // here. The student seed is overwritten with teacher.seed +
  // kStudentSeedOffset.
  TrainConfig student;
  PipelineMode mode = PipelineMode::kStandard;
  // Examples every teacher trains on regardless of membership (e.g. poison).
  std::vector<uint64_t> teacher_fixed_ids;

  friend bool operator==(const PipelineConfig&,
                         const PipelineConfig&) = default;
};

struct PipelineOutput {
  ModelParams teacher;
  QueryDataset query;
  ModelParams student;
  PipelineConfig config;
};

// Hard-label SGD from a fresh initialization derived from config.seed.
absl::StatusOr<ModelParams> TrainTeacher(const Subset& data, size_t classes,
                                         const TrainConfig& config);

absl::StatusOr<QueryDataset> MakeQueryDataset(const ModelParams& teacher,
                                              const Subset& student,
                                              double temperature);

// Soft-label training at the query dataset's temperature. kMixed blends in
// the hard labels with weight 1 - config.alpha.
absl::StatusOr<ModelParams> TrainStudent(const QueryDataset& query,
                                         const TrainConfig& config,
                                         LossMode mode = LossMode::kSoft);

// Query `teacher` on `student` and train a student on the answers.
absl::StatusOr<PipelineOutput> DistillFrom(const ModelParams& teacher,
                                           const Subset& student,
                                           const TrainConfig& student_config);

// Standard mode: teacher on `member_ids` (plus fixed IDs), queried on the
// split's student pool. Self-distillation: teacher on `member_ids`, queried
// on the same rows, student trained with the alpha-mixed loss.
absl::StatusOr<PipelineOutput> RunPipeline(const Dataset& dataset,
                                           const SplitSpec& split,
                                           std::span<const uint64_t> member_ids,
                                           const PipelineConfig& config);

}  // namespace distaudit

#endif  // DISTAUDIT_DISTILL_H_
