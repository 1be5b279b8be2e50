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

// Shadow-model populations: planning, parallel execution, and the on-disk
// logit store.
//
// Store file layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "MILS"
//   4       4     version (u32) = 1
//   8       8     n_models (u64)
//   16      8     n_probe (u64)
//   24      8     n_classes (u64)
//   32      1     family tag (u8)
//   33      ...   membership bits: n_models rows of ceil(n_probe / 8) bytes,
//                 probe p of a row at byte p / 8, bit p % 8 (LSB first)
//   ...     ...   logits: IEEE-754 binary32, index order (model, probe, class)
//
// Probe IDs, per-model seeds and distillation settings go to a JSON sidecar
// next to the store (`<path>.meta.json`).

#ifndef DISTAUDIT_SHADOW_H_
#define DISTAUDIT_SHADOW_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distaudit/data.h"
#include "distaudit/distill.h"
#include "distaudit/nn.h"

namespace distaudit {

// Reference population sizes.
inline constexpr size_t kDefaultCalibrationModels = 100;
inline constexpr size_t kStudentQueryProfileModels = 4000;

enum class ShadowFamily : uint8_t {
  kTeacherOnly = 0,     // teachers, probed directly
  kEndToEnd = 1,        // full distillation pipeline, students probed
  kTransfer = 2,        // teachers; the attack targets students
  kStudentQuery = 3,    // teachers, probed on the student query set
  kPrivateStudent = 4,  // students of fixed public teachers
  kSelfDistill = 5,     // teacher and student share the training subset
};

const char* FamilyName(ShadowFamily family);
absl::StatusOr<ShadowFamily> ParseFamily(const std::string& name);

// What the adversary knows about the teacher in the private-student family.
enum class TeacherKnowledge {
  kKnown,         // the exact teacher
  kCandidateSet,  // one of several candidates; shadows cycle through them
  kSurrogate,     // teachers trained by the adversary on other data
};

const char* KnowledgeName(TeacherKnowledge knowledge);
absl::StatusOr<TeacherKnowledge> ParseKnowledge(const std::string& name);

struct StoreMetadata {
  uint64_t master_seed = 0;
  std::vector<uint64_t> model_seeds;
  double temperature = 1.0;
  double alpha = 1.0;

  friend bool operator==(const StoreMetadata&, const StoreMetadata&) = default;
};

// n_models x n_probe x n_classes logits with per-(model, probe) membership.
struct LogitStore {
  ShadowFamily family = ShadowFamily::kTeacherOnly;
  size_t num_models = 0;
  size_t num_probe = 0;
  size_t num_classes = 0;
  std::vector<uint8_t> membership;  // num_models x num_probe, 0 or 1
  std::vector<float> logits;        // (model, probe, class)
  std::vector<uint64_t> probe_ids;
  StoreMetadata metadata;

  float Logit(size_t model, size_t probe, size_t cls) const {
    return logits[(model * num_probe + probe) * num_classes + cls];
  }
  bool IsMember(size_t model, size_t probe) const {
    return membership[model * num_probe + probe] != 0;
  }
  // Logits of one model on all probes, num_probe x num_classes.
  std::span<const float> ModelLogits(size_t model) const {
    return std::span<const float>(logits).subspan(
        model * num_probe * num_classes, num_probe * num_classes);
  }

  absl::Status Validate() const;
  LogitStore SliceModels(size_t begin, size_t end) const;
  LogitStore SliceProbes(size_t begin, size_t end) const;

  friend bool operator==(const LogitStore&, const LogitStore&) = default;
};

// Everything needed to train and probe one population.
struct ShadowRunSpec {
  ShadowFamily family = ShadowFamily::kTeacherOnly;
  std::shared_ptr<const Dataset> dataset;
  SplitSpec split;
  MembershipPlan plan;
  std::vector<uint64_t> model_seeds;
  // Global index of model 0; changes only when a spec is sliced.
  size_t model_offset = 0;
  std::vector<uint64_t> probe_ids;
  PipelineConfig pipeline;
  uint64_t master_seed = 0;
  // Private-student family only.
  TeacherKnowledge knowledge = TeacherKnowledge::kKnown;
  std::vector<ModelParams> teachers;

  size_t num_models() const { return model_seeds.size(); }
  // Models [begin, end) with their plan rows and seeds.
  ShadowRunSpec SliceModels(size_t begin, size_t end) const;
};

struct PlanRunsInput {
  ShadowFamily family = ShadowFamily::kTeacherOnly;
  std::shared_ptr<const Dataset> dataset;
  SplitSpec split;
  size_t num_models = kDefaultCalibrationModels;
  uint64_t master_seed = 0;
  std::vector<uint64_t> probe_ids;
  PipelineConfig pipeline;
  TeacherKnowledge knowledge = TeacherKnowledge::kKnown;
  std::vector<ModelParams> teachers;
};

// The pool whose membership a family audits: the student pool for the
// private-student family, otherwise the teacher pool.
std::span<const uint64_t> AuditedPool(ShadowFamily family,
                                      const SplitSpec& split);

// Samples the balanced membership plan and per-model seeds from the master
// seed. Both depend only on (master seed, pool, model count), so families
// planned with the same inputs share them.
absl::StatusOr<ShadowRunSpec> PlanRuns(PlanRunsInput input);

// Trains every model of the spec on up to `workers` threads and probes it.
// The result does not depend on `workers`. A failing model is retried once;
// a second failure aborts the run naming the model.
absl::StatusOr<LogitStore> ExecuteRuns(const ShadowRunSpec& spec,
                                       size_t workers);

// Bytes in a store file with the given shape.
size_t StoreFileSize(size_t num_models, size_t num_probe, size_t num_classes);

absl::Status WriteStore(const LogitStore& store, const std::string& path);
absl::StatusOr<LogitStore> ReadStore(const std::string& path);

}  // namespace distaudit

#endif  // DISTAUDIT_SHADOW_H_
