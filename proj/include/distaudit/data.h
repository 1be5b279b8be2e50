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

#ifndef DISTAUDIT_DATA_H_
#define DISTAUDIT_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace distaudit {

// Contiguous copy of a subset of dataset rows.
struct Subset {
  std::vector<double> features;  // size() x dim, row-major
  std::vector<int> labels;
  std::vector<uint64_t> ids;
  size_t size() const { return ids.size(); }
};

// Immutable labelled feature matrix with stable, unique per-example IDs.
class Dataset {
 public:
  Dataset() = default;

  // Validates labels < classes, finite features and unique IDs.
  static absl::StatusOr<Dataset> Create(size_t dim, size_t classes,
                                        std::vector<double> features,
                                        std::vector<int> labels,
                                        std::vector<uint64_t> ids);

  size_t size() const { return labels_.size(); }
  size_t dim() const { return dim_; }
  size_t classes() const { return classes_; }

  std::span<const double> features() const { return features_; }
  std::span<const int> labels() const { return labels_; }
  std::span<const uint64_t> ids() const { return ids_; }

  std::span<const double> row(size_t i) const {
    return std::span<const double>(features_).subspan(i * dim_, dim_);
  }
  int label(size_t i) const { return labels_[i]; }
  uint64_t id(size_t i) const { return ids_[i]; }

  bool Contains(uint64_t id) const { return index_.contains(id); }
  absl::StatusOr<size_t> RowOf(uint64_t id) const;
  // Largest ID plus one; fresh IDs are allocated from here.
  uint64_t NextId() const;

  absl::StatusOr<Subset> Gather(std::span<const uint64_t> ids) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.dim_ == b.dim_ && a.classes_ == b.classes_ &&
           a.features_ == b.features_ && a.labels_ == b.labels_ &&
           a.ids_ == b.ids_;
  }

 private:
  size_t dim_ = 0;
  size_t classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<uint64_t> ids_;
  std::unordered_map<uint64_t, size_t> index_;
};

// Teacher and student pools. In self-distillation mode both pools are the
// same list; otherwise they are disjoint. `held_out_ids` is whatever the
// split did not assign, in the split's shuffled order.
struct SplitSpec {
  std::vector<uint64_t> teacher_ids;
  std::vector<uint64_t> student_ids;
  std::vector<uint64_t> held_out_ids;
  uint64_t seed = 0;
  bool self_distill = false;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

// Which pool examples each of n_models shadow models trains on.
class MembershipPlan {
 public:
  MembershipPlan() = default;
  MembershipPlan(std::vector<uint64_t> pool_ids, size_t num_models,
                 std::vector<uint8_t> bits, uint64_t seed);

  size_t num_models() const { return num_models_; }
  size_t pool_size() const { return pool_ids_.size(); }
  std::span<const uint64_t> pool_ids() const { return pool_ids_; }
  uint64_t seed() const { return seed_; }

  bool IsIn(size_t model, size_t pool_index) const {
    return bits_[model * pool_ids_.size() + pool_index] != 0;
  }
  // IDs marked IN for `model`, in pool order.
  std::vector<uint64_t> InIds(size_t model) const;
  // Number of models that include pool example `pool_index`.
  size_t InCount(size_t pool_index) const;
  // Rows [begin, end) as a new plan over the same pool.
  MembershipPlan SliceModels(size_t begin, size_t end) const;

  friend bool operator==(const MembershipPlan&,
                         const MembershipPlan&) = default;

 private:
  std::vector<uint64_t> pool_ids_;
  size_t num_models_ = 0;
  std::vector<uint8_t> bits_;  // num_models x pool_size, row-major
  uint64_t seed_ = 0;
};

// Gaussian class clusters around random unit-norm centers.
absl::StatusOr<Dataset> GenSyntheticMixture(size_t classes, size_t dims,
                                            size_t per_class, double spread,
                                            uint64_t seed);

// Reads `label,f1,...,fd` rows (no header). IDs are 0-based row indices.
absl::StatusOr<Dataset> LoadCsvTabular(const std::string& path,
                                       size_t classes);

// Writes the format read by LoadCsvTabular, shortest round-trip decimals.
absl::Status WriteCsvTabular(const Dataset& dataset, const std::string& path);

// Keeps the first occurrence of each distinct feature vector. Returns the
// reduced dataset and the IDs that were dropped.
std::pair<Dataset, std::vector<uint64_t>> DedupExact(const Dataset& dataset);

absl::StatusOr<SplitSpec> SplitTeacherStudent(const Dataset& dataset,
                                              size_t n_teacher,
                                              size_t n_student, uint64_t seed,
                                              bool self_distill);

// Every pool example is IN for exactly floor(n_models / 2) models.
absl::StatusOr<MembershipPlan> SampleMembershipPlan(
    std::span<const uint64_t> pool_ids, size_t num_models, uint64_t seed);

struct DuplicatedSplit {
  Dataset dataset;
  SplitSpec split;
  // (teacher target ID, ID of its copy in the student pool).
  std::vector<std::pair<uint64_t, uint64_t>> copies;
};

// Appends an exact copy of each target (fresh ID, same label) to the
// dataset and to the end of the student pool.
absl::StatusOr<DuplicatedSplit> InjectDuplicates(
    const SplitSpec& split, std::span<const uint64_t> targets,
    const Dataset& dataset);

// Appends `replicas` copies of the target's features, all carrying one wrong
// label drawn uniformly from the other classes. New rows get fresh IDs and
// are the last `replicas` rows of the result.
absl::StatusOr<Dataset> PoisonLabelFlip(const Dataset& dataset,
                                        uint64_t target_id, size_t replicas,
                                        uint64_t seed);

}  // namespace distaudit

#endif  // DISTAUDIT_DATA_H_
