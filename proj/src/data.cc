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

#include "distaudit/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string_view>
#include <unordered_set>

#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "absl/strings/strip.h"
#include "distaudit/status_macros.h"

namespace distaudit {

absl::StatusOr<Dataset> Dataset::Create(size_t dim, size_t classes,
                                        std::vector<double> features,
                                        std::vector<int> labels,
                                        std::vector<uint64_t> ids) {
  if (dim == 0) return absl::InvalidArgumentError("dataset dim must be >= 1");
  if (classes < 2) {
    return absl::InvalidArgumentError("dataset needs at least 2 classes");
  }
  const size_t n = labels.size();
  if (features.size() != n * dim || ids.size() != n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "dataset shapes disagree: %d labels, %d ids, %d feature values "
        "(dim %d)",
        n, ids.size(), features.size(), dim));
  }
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<size_t>(labels[i]) >= classes) {
      return absl::OutOfRangeError(absl::StrFormat(
          "label %d of example %d outside [0, %d)", labels[i], ids[i],
          classes));
    }
  }
  for (size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features[i])) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "non-finite feature in example %d", ids[i / dim]));
    }
  }
  Dataset d;
  d.dim_ = dim;
  d.classes_ = classes;
  d.index_.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!d.index_.emplace(ids[i], i).second) {
      return absl::InvalidArgumentError(
          absl::StrFormat("duplicate example ID %d", ids[i]));
    }
  }
  d.features_ = std::move(features);
  d.labels_ = std::move(labels);
  d.ids_ = std::move(ids);
  return d;
}

absl::StatusOr<size_t> Dataset::RowOf(uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    return absl::NotFoundError(absl::StrFormat("no example with ID %d", id));
  }
  return it->second;
}

uint64_t Dataset::NextId() const {
  if (ids_.empty()) return 0;
  return *std::max_element(ids_.begin(), ids_.end()) + 1;
}

absl::StatusOr<Subset> Dataset::Gather(std::span<const uint64_t> ids) const {
  Subset s;
  s.features.reserve(ids.size() * dim_);
  s.labels.reserve(ids.size());
  s.ids.assign(ids.begin(), ids.end());
  for (uint64_t id : ids) {
    DISTAUDIT_ASSIGN_OR_RETURN(size_t r, RowOf(id));
    const auto x = row(r);
    s.features.insert(s.features.end(), x.begin(), x.end());
    s.labels.push_back(labels_[r]);
  }
  return s;
}

MembershipPlan::MembershipPlan(std::vector<uint64_t> pool_ids,
                               size_t num_models, std::vector<uint8_t> bits,
                               uint64_t seed)
    : pool_ids_(std::move(pool_ids)),
      num_models_(num_models),
      bits_(std::move(bits)),
      seed_(seed) {}

std::vector<uint64_t> MembershipPlan::InIds(size_t model) const {
  std::vector<uint64_t> out;
  for (size_t j = 0; j < pool_ids_.size(); ++j) {
    if (IsIn(model, j)) out.push_back(pool_ids_[j]);
  }
  return out;
}

size_t MembershipPlan::InCount(size_t pool_index) const {
  size_t count = 0;
  for (size_t m = 0; m < num_models_; ++m) count += IsIn(m, pool_index);
  return count;
}

MembershipPlan MembershipPlan::SliceModels(size_t begin, size_t end) const {
  const size_t p = pool_ids_.size();
  std::vector<uint8_t> bits(bits_.begin() + begin * p, bits_.begin() + end * p);
  return MembershipPlan(pool_ids_, end - begin, std::move(bits), seed_);
}

absl::StatusOr<Dataset> GenSyntheticMixture(size_t classes, size_t dims,
                                            size_t per_class, double spread,
                                            uint64_t seed) {
  if (classes < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("need at least 2 classes, got %d", classes));
  }
  if (dims < 1) return absl::InvalidArgumentError("need at least 1 dimension");
  if (per_class < 1) {
    return absl::InvalidArgumentError("need at least 1 example per class");
  }
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    return absl::InvalidArgumentError("spread must be finite and >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centers(classes * dims);
  for (size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (size_t k = 0; k < dims; ++k) {
      centers[c * dims + k] = normal(rng);
      norm += centers[c * dims + k] * centers[c * dims + k];
    }
    norm = std::sqrt(norm);
    for (size_t k = 0; k < dims; ++k) centers[c * dims + k] /= norm;
  }
  const size_t n = classes * per_class;
  std::vector<double> features(n * dims);
  std::vector<int> labels(n);
  std::vector<uint64_t> ids(n);
  for (size_t c = 0; c < classes; ++c) {
    for (size_t i = 0; i < per_class; ++i) {
      const size_t r = c * per_class + i;
      labels[r] = static_cast<int>(c);
      ids[r] = r;
      for (size_t k = 0; k < dims; ++k) {
        features[r * dims + k] = centers[c * dims + k] + spread * normal(rng);
      }
    }
  }
  return Dataset::Create(dims, classes, std::move(features), std::move(labels),
                         std::move(ids));
}

namespace {

template <typename T>
bool ParseNumber(absl::string_view s, T& out) {
  s = absl::StripAsciiWhitespace(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

absl::StatusOr<Dataset> LoadCsvTabular(const std::string& path,
                                       size_t classes) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrFormat("cannot open %s", path));
  std::vector<double> features;
  std::vector<int> labels;
  size_t dim = 0;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    absl::string_view view = absl::StripTrailingAsciiWhitespace(line);
    if (view.empty()) continue;
    const std::vector<absl::string_view> fields = absl::StrSplit(view, ',');
    if (fields.size() < 2) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s: parse error at row %d: expected a label and features", path,
          line_no));
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s: parse error at row %d: %d features, expected %d", path, line_no,
          fields.size() - 1, dim));
    }
    int label = 0;
    if (!ParseNumber(fields[0], label) || label < 0) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s: parse error at row %d: bad label '%s'", path, line_no,
          fields[0]));
    }
    if (static_cast<size_t>(label) >= classes) {
      return absl::OutOfRangeError(absl::StrFormat(
          "%s: row %d: label %d >= class count %d", path, line_no, label,
          classes));
    }
    for (size_t k = 1; k < fields.size(); ++k) {
      double v = 0.0;
      if (!ParseNumber(fields[k], v) || !std::isfinite(v)) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "%s: parse error at row %d, column %d: '%s'", path, line_no, k + 1,
            fields[k]));
      }
      features.push_back(v);
    }
    labels.push_back(label);
  }
  if (labels.empty()) {
    return absl::InvalidArgumentError(absl::StrFormat("%s: no rows", path));
  }
  std::vector<uint64_t> ids(labels.size());
  std::iota(ids.begin(), ids.end(), uint64_t{0});
  return Dataset::Create(dim, classes, std::move(features), std::move(labels),
                         std::move(ids));
}

absl::Status WriteCsvTabular(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::UnavailableError(
        absl::StrFormat("cannot open %s for writing", path));
  }
  char buf[64];
  for (size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.label(i);
    for (double v : dataset.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
  out.flush();
  if (!out) {
    return absl::DataLossError(absl::StrFormat("write to %s failed", path));
  }
  return absl::OkStatus();
}

std::pair<Dataset, std::vector<uint64_t>> DedupExact(const Dataset& dataset) {
  std::map<std::vector<double>, size_t> seen;
  std::vector<uint64_t> kept, removed;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto x = dataset.row(i);
    if (seen.emplace(std::vector<double>(x.begin(), x.end()), i).second) {
      kept.push_back(dataset.id(i));
    } else {
      removed.push_back(dataset.id(i));
    }
  }
  if (removed.empty()) return {dataset, {}};
  Subset s = *dataset.Gather(kept);
  Dataset out = *Dataset::Create(dataset.dim(), dataset.classes(),
                                 std::move(s.features), std::move(s.labels),
                                 std::move(s.ids));
  return {std::move(out), std::move(removed)};
}

absl::StatusOr<SplitSpec> SplitTeacherStudent(const Dataset& dataset,
                                              size_t n_teacher,
                                              size_t n_student, uint64_t seed,
                                              bool self_distill) {
  const size_t n = dataset.size();
  if (self_distill) {
    if (n_teacher != n_student || n_teacher > n || n_teacher == 0) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "self-distillation needs n_teacher == n_student <= %d, got %d / %d",
          n, n_teacher, n_student));
    }
  } else if (n_teacher == 0 || n_student == 0 || n_teacher + n_student > n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "cannot split %d examples into teacher %d + student %d", n, n_teacher,
        n_student));
  }
  std::vector<uint64_t> order(dataset.ids().begin(), dataset.ids().end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitSpec split;
  split.seed = seed;
  split.self_distill = self_distill;
  split.teacher_ids.assign(order.begin(), order.begin() + n_teacher);
  if (self_distill) {
    split.student_ids = split.teacher_ids;
    split.held_out_ids.assign(order.begin() + n_teacher, order.end());
  } else {
    split.student_ids.assign(order.begin() + n_teacher,
                             order.begin() + n_teacher + n_student);
    split.held_out_ids.assign(order.begin() + n_teacher + n_student,
                              order.end());
  }
  return split;
}

absl::StatusOr<MembershipPlan> SampleMembershipPlan(
    std::span<const uint64_t> pool_ids, size_t num_models, uint64_t seed) {
  if (num_models < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("membership plan needs >= 2 models, got %d",
                        num_models));
  }
  const size_t p = pool_ids.size();
  std::vector<uint8_t> bits(num_models * p, 0);
  std::vector<size_t> models(num_models);
  std::mt19937_64 rng(seed);
  for (size_t j = 0; j < p; ++j) {
    std::iota(models.begin(), models.end(), size_t{0});
    std::shuffle(models.begin(), models.end(), rng);
    for (size_t k = 0; k < num_models / 2; ++k) bits[models[k] * p + j] = 1;
  }
  return MembershipPlan(std::vector<uint64_t>(pool_ids.begin(), pool_ids.end()),
                        num_models, std::move(bits), seed);
}

absl::StatusOr<DuplicatedSplit> InjectDuplicates(
    const SplitSpec& split, std::span<const uint64_t> targets,
    const Dataset& dataset) {
  const std::unordered_set<uint64_t> teacher(split.teacher_ids.begin(),
                                             split.teacher_ids.end());
  for (uint64_t t : targets) {
    if (!teacher.contains(t)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("duplicate target %d is not in the teacher pool", t));
    }
  }
  DuplicatedSplit out;
  out.split = split;
  if (targets.empty()) {
    out.dataset = dataset;
    return out;
  }
  std::vector<double> features(dataset.features().begin(),
                               dataset.features().end());
  std::vector<int> labels(dataset.labels().begin(), dataset.labels().end());
  std::vector<uint64_t> ids(dataset.ids().begin(), dataset.ids().end());
  uint64_t next = dataset.NextId();
  for (uint64_t t : targets) {
    DISTAUDIT_ASSIGN_OR_RETURN(size_t r, dataset.RowOf(t));
    const auto x = dataset.row(r);
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(dataset.label(r));
    ids.push_back(next);
    out.split.student_ids.push_back(next);
    out.copies.emplace_back(t, next);
    ++next;
  }
  DISTAUDIT_ASSIGN_OR_RETURN(
      out.dataset, Dataset::Create(dataset.dim(), dataset.classes(),
                                   std::move(features), std::move(labels),
                                   std::move(ids)));
  return out;
}

absl::StatusOr<Dataset> PoisonLabelFlip(const Dataset& dataset,
                                        uint64_t target_id, size_t replicas,
                                        uint64_t seed) {
  if (!dataset.Contains(target_id)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("poison target %d is not in the dataset", target_id));
  }
  const size_t r = *dataset.RowOf(target_id);
  if (dataset.classes() < 2) {
    return absl::InvalidArgumentError("label flipping needs >= 2 classes");
  }
  if (replicas == 0) return dataset;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(
      0, static_cast<int>(dataset.classes()) - 2);
  const int truth = dataset.label(r);
  int wrong = pick(rng);
  if (wrong >= truth) ++wrong;

  std::vector<double> features(dataset.features().begin(),
                               dataset.features().end());
  std::vector<int> labels(dataset.labels().begin(), dataset.labels().end());
  std::vector<uint64_t> ids(dataset.ids().begin(), dataset.ids().end());
  const auto x = dataset.row(r);
  uint64_t next = dataset.NextId();
  for (size_t k = 0; k < replicas; ++k) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(wrong);
    ids.push_back(next++);
  }
  return Dataset::Create(dataset.dim(), dataset.classes(), std::move(features),
                         std::move(labels), std::move(ids));
}

}  // namespace distaudit
