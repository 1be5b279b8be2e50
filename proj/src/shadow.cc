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

#include "distaudit/shadow.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <thread>
#include <unordered_map>

#include "absl/strings/str_format.h"
#include "distaudit/seeding.h"
#include "distaudit/status_macros.h"
#include "nlohmann/json.hpp"

namespace distaudit {
namespace {

constexpr char kMagic[4] = {'M', 'I', 'L', 'S'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderSize = 4 + 4 + 8 + 8 + 8 + 1;
constexpr uint8_t kMaxFamilyTag = 5;
constexpr uint64_t kPlanStream = 0;

struct FamilyEntry {
  ShadowFamily family;
  const char* name;
};
constexpr FamilyEntry kFamilies[] = {
    {ShadowFamily::kTeacherOnly, "teacher-only"},
    {ShadowFamily::kEndToEnd, "end-to-end"},
    {ShadowFamily::kTransfer, "transfer"},
    {ShadowFamily::kStudentQuery, "student-query"},
    {ShadowFamily::kPrivateStudent, "private-student"},
    {ShadowFamily::kSelfDistill, "self-distill"},
};

std::string SidecarPath(const std::string& path) {
  return path + ".meta.json";
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
uint64_t GetLE(const unsigned char* p, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

size_t RowBytes(size_t num_probe) { return (num_probe + 7) / 8; }

absl::StatusOr<ModelParams> TrainShadowModel(const ShadowRunSpec& spec,
                                             size_t m) {
  const Dataset& data = *spec.dataset;
  const uint64_t seed = spec.model_seeds[m];
  const std::vector<uint64_t> members = spec.plan.InIds(m);
  switch (spec.family) {
    case ShadowFamily::kTeacherOnly:
    case ShadowFamily::kTransfer:
    case ShadowFamily::kStudentQuery: {
      std::vector<uint64_t> ids = members;
      ids.insert(ids.end(), spec.pipeline.teacher_fixed_ids.begin(),
                 spec.pipeline.teacher_fixed_ids.end());
      DISTAUDIT_ASSIGN_OR_RETURN(Subset subset, data.Gather(ids));
      TrainConfig cfg = spec.pipeline.teacher;
      cfg.seed = seed;
      return TrainTeacher(subset, data.classes(), cfg);
    }
    case ShadowFamily::kEndToEnd:
    case ShadowFamily::kSelfDistill: {
      PipelineConfig cfg = spec.pipeline;
      cfg.teacher.seed = seed;
      cfg.mode = spec.family == ShadowFamily::kSelfDistill
                     ? PipelineMode::kSelfDistill
                     : PipelineMode::kStandard;
      DISTAUDIT_ASSIGN_OR_RETURN(PipelineOutput out,
                                 RunPipeline(data, spec.split, members, cfg));
      return std::move(out.student);
    }
    case ShadowFamily::kPrivateStudent: {
      const ModelParams& teacher =
          spec.teachers[(spec.model_offset + m) % spec.teachers.size()];
      DISTAUDIT_ASSIGN_OR_RETURN(Subset subset, data.Gather(members));
      TrainConfig cfg = spec.pipeline.student;
      cfg.seed = seed + kStudentSeedOffset;
      DISTAUDIT_ASSIGN_OR_RETURN(PipelineOutput out,
                                 DistillFrom(teacher, subset, cfg));
      return std::move(out.student);
    }
  }
  return absl::InternalError("unknown shadow family");
}

absl::StatusOr<std::vector<float>> TrainAndProbe(
    const ShadowRunSpec& spec, size_t m, std::span<const double> probes) {
  DISTAUDIT_ASSIGN_OR_RETURN(ModelParams model, TrainShadowModel(spec, m));
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<double> logits,
                             BatchLogits(model, probes));
  std::vector<float> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = static_cast<float>(logits[i]);
    if (!std::isfinite(out[i])) {
      return absl::InternalError("non-finite logit");
    }
  }
  return out;
}

absl::Status ValidateSpec(const ShadowRunSpec& spec, size_t workers) {
  if (workers < 1) return absl::InvalidArgumentError("workers must be >= 1");
  if (spec.dataset == nullptr) {
    return absl::InvalidArgumentError("run spec has no dataset");
  }
  if (spec.probe_ids.empty()) {
    return absl::InvalidArgumentError("run spec has an empty probe set");
  }
  if (spec.num_models() != spec.plan.num_models()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "run spec has %d seeds but the plan has %d models", spec.num_models(),
        spec.plan.num_models()));
  }
  if (spec.family == ShadowFamily::kPrivateStudent) {
    if (spec.teachers.empty()) {
      return absl::InvalidArgumentError(
          "private-student runs need at least one teacher");
    }
    if (spec.knowledge == TeacherKnowledge::kKnown &&
        spec.teachers.size() != 1) {
      return absl::InvalidArgumentError(
          "known-teacher runs take exactly one teacher");
    }
  }
  return absl::OkStatus();
}

}  // namespace

const char* FamilyName(ShadowFamily family) {
  for (const auto& e : kFamilies) {
    if (e.family == family) return e.name;
  }
  return "unknown";
}

absl::StatusOr<ShadowFamily> ParseFamily(const std::string& name) {
  for (const auto& e : kFamilies) {
    if (name == e.name) return e.family;
  }
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown shadow family '%s'", name));
}

const char* KnowledgeName(TeacherKnowledge knowledge) {
  switch (knowledge) {
    case TeacherKnowledge::kKnown:
      return "known";
    case TeacherKnowledge::kCandidateSet:
      return "candidate-set";
    case TeacherKnowledge::kSurrogate:
      return "surrogate";
  }
  return "unknown";
}

absl::StatusOr<TeacherKnowledge> ParseKnowledge(const std::string& name) {
  for (auto k : {TeacherKnowledge::kKnown, TeacherKnowledge::kCandidateSet,
                 TeacherKnowledge::kSurrogate}) {
    if (name == KnowledgeName(k)) return k;
  }
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown teacher knowledge '%s'", name));
}

absl::Status LogitStore::Validate() const {
  if (membership.size() != num_models * num_probe ||
      logits.size() != num_models * num_probe * num_classes ||
      probe_ids.size() != num_probe) {
    return absl::InvalidArgumentError("logit store shapes are inconsistent");
  }
  if (!metadata.model_seeds.empty() &&
      metadata.model_seeds.size() != num_models) {
    return absl::InvalidArgumentError("logit store seed count mismatch");
  }
  for (float v : logits) {
    if (!std::isfinite(v)) {
      return absl::InvalidArgumentError("logit store holds a non-finite logit");
    }
  }
  return absl::OkStatus();
}

LogitStore LogitStore::SliceModels(size_t begin, size_t end) const {
  LogitStore out;
  out.family = family;
  out.num_models = end - begin;
  out.num_probe = num_probe;
  out.num_classes = num_classes;
  out.membership.assign(membership.begin() + begin * num_probe,
                        membership.begin() + end * num_probe);
  out.logits.assign(logits.begin() + begin * num_probe * num_classes,
                    logits.begin() + end * num_probe * num_classes);
  out.probe_ids = probe_ids;
  out.metadata = metadata;
  if (!metadata.model_seeds.empty()) {
    out.metadata.model_seeds.assign(metadata.model_seeds.begin() + begin,
                                    metadata.model_seeds.begin() + end);
  }
  return out;
}

LogitStore LogitStore::SliceProbes(size_t begin, size_t end) const {
  LogitStore out;
  out.family = family;
  out.num_models = num_models;
  out.num_probe = end - begin;
  out.num_classes = num_classes;
  out.metadata = metadata;
  out.probe_ids.assign(probe_ids.begin() + begin, probe_ids.begin() + end);
  out.membership.reserve(num_models * out.num_probe);
  out.logits.reserve(num_models * out.num_probe * num_classes);
  for (size_t m = 0; m < num_models; ++m) {
    const size_t row = m * num_probe;
    out.membership.insert(out.membership.end(),
                          membership.begin() + row + begin,
                          membership.begin() + row + end);
    out.logits.insert(out.logits.end(),
                      logits.begin() + (row + begin) * num_classes,
                      logits.begin() + (row + end) * num_classes);
  }
  return out;
}

ShadowRunSpec ShadowRunSpec::SliceModels(size_t begin, size_t end) const {
  ShadowRunSpec out = *this;
  out.plan = plan.SliceModels(begin, end);
  out.model_seeds.assign(model_seeds.begin() + begin,
                         model_seeds.begin() + end);
  out.model_offset = model_offset + begin;
  return out;
}

std::span<const uint64_t> AuditedPool(ShadowFamily family,
                                      const SplitSpec& split) {
  if (family == ShadowFamily::kPrivateStudent) return split.student_ids;
  return split.teacher_ids;
}

absl::StatusOr<ShadowRunSpec> PlanRuns(PlanRunsInput input) {
  if (input.num_models < 2) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "need at least 2 shadow models, got %d", input.num_models));
  }
  if (input.dataset == nullptr) {
    return absl::InvalidArgumentError("PlanRuns: no dataset");
  }
  if (input.probe_ids.empty()) {
    return absl::InvalidArgumentError("PlanRuns: empty probe set");
  }
  if (input.family == ShadowFamily::kSelfDistill && !input.split.self_distill) {
    return absl::InvalidArgumentError(
        "self-distill runs need a self-distillation split");
  }
  ShadowRunSpec spec;
  spec.family = input.family;
  spec.dataset = std::move(input.dataset);
  spec.split = std::move(input.split);
  spec.probe_ids = std::move(input.probe_ids);
  spec.pipeline = std::move(input.pipeline);
  spec.master_seed = input.master_seed;
  spec.knowledge = input.knowledge;
  spec.teachers = std::move(input.teachers);
  for (uint64_t id : spec.probe_ids) {
    if (!spec.dataset->Contains(id)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("probe ID %d not in the dataset", id));
    }
  }
  DISTAUDIT_ASSIGN_OR_RETURN(
      spec.plan,
      SampleMembershipPlan(AuditedPool(spec.family, spec.split),
                           input.num_models,
                           DeriveSeed(input.master_seed, kPlanStream)));
  spec.model_seeds.resize(input.num_models);
  for (size_t m = 0; m < input.num_models; ++m) {
    spec.model_seeds[m] = DeriveSeed(input.master_seed, m + 1);
  }
  return spec;
}

absl::StatusOr<LogitStore> ExecuteRuns(const ShadowRunSpec& spec,
                                       size_t workers) {
  DISTAUDIT_RETURN_IF_ERROR(ValidateSpec(spec, workers));
  const Dataset& data = *spec.dataset;
  DISTAUDIT_ASSIGN_OR_RETURN(Subset probes, data.Gather(spec.probe_ids));

  const size_t n = spec.num_models();
  std::vector<std::vector<float>> results(n);
  std::vector<absl::Status> errors(n);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (size_t m = next++; m < n && !failed; m = next++) {
      auto r = TrainAndProbe(spec, m, probes.features);
      if (!r.ok()) r = TrainAndProbe(spec, m, probes.features);
      if (r.ok()) {
        results[m] = *std::move(r);
      } else {
        errors[m] = r.status();
        failed = true;
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    const size_t count = std::min(workers, n);
    for (size_t t = 1; t < count; ++t) threads.emplace_back(work);
    work();
  }
  for (size_t m = 0; m < n; ++m) {
    if (!errors[m].ok()) {
      return absl::InternalError(absl::StrFormat(
          "shadow model %d failed after one retry: %s", spec.model_offset + m,
          errors[m].ToString()));
    }
  }

  LogitStore store;
  store.family = spec.family;
  store.num_models = n;
  store.num_probe = spec.probe_ids.size();
  store.num_classes = data.classes();
  store.probe_ids = spec.probe_ids;
  store.metadata.master_seed = spec.master_seed;
  store.metadata.model_seeds = spec.model_seeds;
  store.metadata.temperature = spec.pipeline.student.temperature;
  store.metadata.alpha = spec.pipeline.student.alpha;

  std::unordered_map<uint64_t, size_t> pool_index;
  for (size_t j = 0; j < spec.plan.pool_size(); ++j) {
    pool_index.emplace(spec.plan.pool_ids()[j], j);
  }
  store.membership.assign(n * store.num_probe, 0);
  store.logits.reserve(n * store.num_probe * store.num_classes);
  for (size_t m = 0; m < n; ++m) {
    for (size_t p = 0; p < store.num_probe; ++p) {
      auto it = pool_index.find(store.probe_ids[p]);
      if (it != pool_index.end() && spec.plan.IsIn(m, it->second)) {
        store.membership[m * store.num_probe + p] = 1;
      }
    }
    store.logits.insert(store.logits.end(), results[m].begin(),
                        results[m].end());
  }
  return store;
}

size_t StoreFileSize(size_t num_models, size_t num_probe,
                     size_t num_classes) {
  return kHeaderSize + num_models * RowBytes(num_probe) +
         4 * num_models * num_probe * num_classes;
}

absl::Status WriteStore(const LogitStore& store, const std::string& path) {
  DISTAUDIT_RETURN_IF_ERROR(store.Validate());
  std::string buf;
  buf.reserve(
      StoreFileSize(store.num_models, store.num_probe, store.num_classes));
  buf.append(kMagic, 4);
  PutU32(buf, kVersion);
  PutU64(buf, store.num_models);
  PutU64(buf, store.num_probe);
  PutU64(buf, store.num_classes);
  buf.push_back(static_cast<char>(store.family));
  const size_t row_bytes = RowBytes(store.num_probe);
  for (size_t m = 0; m < store.num_models; ++m) {
    std::string row(row_bytes, '\0');
    for (size_t p = 0; p < store.num_probe; ++p) {
      if (store.IsMember(m, p)) {
        row[p / 8] = static_cast<char>(row[p / 8] | (1u << (p % 8)));
      }
    }
    buf += row;
  }
  for (float v : store.logits) PutU32(buf, std::bit_cast<uint32_t>(v));

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      return absl::UnavailableError(
          absl::StrFormat("cannot open %s for writing", path));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
      return absl::DataLossError(absl::StrFormat("write to %s failed", path));
    }
  }

  nlohmann::json meta;
  meta["family"] = FamilyName(store.family);
  meta["probe_ids"] = store.probe_ids;
  meta["master_seed"] = store.metadata.master_seed;
  meta["model_seeds"] = store.metadata.model_seeds;
  meta["temperature"] = store.metadata.temperature;
  meta["alpha"] = store.metadata.alpha;
  std::ofstream side(SidecarPath(path), std::ios::trunc);
  if (!side) {
    return absl::UnavailableError(
        absl::StrFormat("cannot open %s for writing", SidecarPath(path)));
  }
  side << meta.dump() << '\n';
  if (!side) {
    return absl::DataLossError(
        absl::StrFormat("write to %s failed", SidecarPath(path)));
  }
  return absl::OkStatus();
}

absl::StatusOr<LogitStore> ReadStore(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrFormat("cannot open %s", path));
  const std::vector<unsigned char> buf(std::istreambuf_iterator<char>(in), {});
  const size_t size = buf.size();
  if (size < kHeaderSize) {
    return absl::DataLossError(absl::StrFormat(
        "%s: truncated header, file ends at offset %d of %d", path, size,
        kHeaderSize));
  }
  if (!std::equal(kMagic, kMagic + 4, buf.begin())) {
    return absl::DataLossError(
        absl::StrFormat("%s: bad magic at offset 0", path));
  }
  const uint32_t version = static_cast<uint32_t>(GetLE(&buf[4], 4));
  if (version != kVersion) {
    return absl::DataLossError(absl::StrFormat(
        "%s: unsupported version %d at offset 4", path, version));
  }
  LogitStore store;
  store.num_models = GetLE(&buf[8], 8);
  store.num_probe = GetLE(&buf[16], 8);
  store.num_classes = GetLE(&buf[24], 8);
  const uint8_t tag = buf[32];
  if (tag > kMaxFamilyTag) {
    return absl::DataLossError(absl::StrFormat(
        "%s: unknown family tag %d at offset 32", path, tag));
  }
  store.family = static_cast<ShadowFamily>(tag);

  // Reject shapes whose byte count cannot fit before multiplying out.
  const unsigned __int128 cells =
      static_cast<unsigned __int128>(store.num_models) * store.num_probe;
  const unsigned __int128 expected =
      kHeaderSize +
      static_cast<unsigned __int128>(store.num_models) *
          RowBytes(store.num_probe) +
      cells * store.num_classes * 4;
  if (expected > size) {
    return absl::DataLossError(absl::StrFormat(
        "%s: truncated, file ends at offset %d but the header implies %d "
        "bytes",
        path, size, static_cast<uint64_t>(std::min<unsigned __int128>(
                        expected, std::numeric_limits<uint64_t>::max()))));
  }
  if (expected < size) {
    return absl::DataLossError(absl::StrFormat(
        "%s: %d trailing bytes at offset %d", path,
        size - static_cast<size_t>(expected), static_cast<size_t>(expected)));
  }

  size_t offset = kHeaderSize;
  const size_t row_bytes = RowBytes(store.num_probe);
  store.membership.assign(store.num_models * store.num_probe, 0);
  for (size_t m = 0; m < store.num_models; ++m) {
    for (size_t b = 0; b < row_bytes; ++b) {
      const unsigned char byte = buf[offset + b];
      for (size_t bit = 0; bit < 8; ++bit) {
        const size_t p = b * 8 + bit;
        const bool set = (byte >> bit) & 1u;
        if (p >= store.num_probe) {
          if (set) {
            return absl::DataLossError(absl::StrFormat(
                "%s: nonzero padding bit at offset %d", path, offset + b));
          }
          continue;
        }
        store.membership[m * store.num_probe + p] = set ? 1 : 0;
      }
    }
    offset += row_bytes;
  }
  const size_t count = store.num_models * store.num_probe * store.num_classes;
  store.logits.resize(count);
  for (size_t i = 0; i < count; ++i) {
    store.logits[i] = std::bit_cast<float>(
        static_cast<uint32_t>(GetLE(&buf[offset], 4)));
    if (!std::isfinite(store.logits[i])) {
      return absl::DataLossError(absl::StrFormat(
          "%s: non-finite logit at offset %d", path, offset));
    }
    offset += 4;
  }

  store.probe_ids.resize(store.num_probe);
  for (size_t p = 0; p < store.num_probe; ++p) store.probe_ids[p] = p;
  const std::string side_path = SidecarPath(path);
  if (std::filesystem::exists(side_path)) {
    std::ifstream side(side_path);
    const nlohmann::json meta = nlohmann::json::parse(side, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) {
      return absl::DataLossError(
          absl::StrFormat("%s: malformed metadata", side_path));
    }
    try {
      store.probe_ids = meta.at("probe_ids").get<std::vector<uint64_t>>();
      store.metadata.master_seed = meta.at("master_seed").get<uint64_t>();
      store.metadata.model_seeds =
          meta.at("model_seeds").get<std::vector<uint64_t>>();
      store.metadata.temperature = meta.at("temperature").get<double>();
      store.metadata.alpha = meta.at("alpha").get<double>();
    } catch (const nlohmann::json::exception& e) {
      return absl::DataLossError(
          absl::StrFormat("%s: %s", side_path, e.what()));
    }
  }
  absl::Status valid = store.Validate();
  if (!valid.ok()) {
    return absl::DataLossError(
        absl::StrFormat("%s: %s", path, valid.message()));
  }
  return store;
}

}  // namespace distaudit
