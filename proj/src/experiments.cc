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

#include "distaudit/experiments.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "distaudit/seeding.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

using Clock = std::chrono::steady_clock;

constexpr uint64_t kStreamBase = uint64_t{1} << 40;
constexpr uint64_t kTargetStream = kStreamBase + 1;
constexpr uint64_t kPoisonStream = kStreamBase + 0x10000;
constexpr uint64_t kTeacherStream = kStreamBase + 0x20000;
constexpr uint64_t kSurrogateStream = kStreamBase + 0x30000;
constexpr uint64_t kPrivateStudentStream = kStreamBase + 0x40000;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Tag(double v) { return FormatDouble(v); }

std::vector<uint64_t> Concat(std::span<const uint64_t> a,
                             std::span<const uint64_t> b,
                             std::span<const uint64_t> c = {}) {
  std::vector<uint64_t> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

absl::StatusOr<std::vector<int>> LabelsOf(const Dataset& dataset,
                                          std::span<const uint64_t> ids) {
  std::vector<int> labels(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    DISTAUDIT_ASSIGN_OR_RETURN(size_t row, dataset.RowOf(ids[i]));
    labels[i] = dataset.label(row);
  }
  return labels;
}

LiraOptions MakeLiraOptions(const ExperimentConfig& cfg) {
  LiraOptions o;
  o.variance_floor = cfg.variance_floor;
  o.global_variance = cfg.global_variance;
  return o;
}

StudentQueryOptions MakeQueryOptions(const ExperimentConfig& cfg,
                                     LabelMode mode, bool filter) {
  StudentQueryOptions o;
  o.k = cfg.k;
  o.filter = filter;
  o.label_mode = mode;
  o.lira = MakeLiraOptions(cfg);
  return o;
}

absl::StatusOr<std::vector<ScoreRecord>> DirectAttack(
    const LogitStore& calibration, const LogitStore& targets,
    const Dataset& dataset, const LiraOptions& options,
    const std::string& family) {
  DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix cal,
                             CorrectClassObservations(calibration, dataset));
  DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix tgt,
                             CorrectClassObservations(targets, dataset));
  return DirectLira(cal, tgt, options, family);
}

absl::StatusOr<std::unordered_map<uint64_t, ExampleAccuracy>> AccuracyById(
    std::span<const ScoreRecord> records) {
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<ExampleAccuracy> acc,
                             PerExampleAccuracy(records));
  std::unordered_map<uint64_t, ExampleAccuracy> out;
  for (const ExampleAccuracy& a : acc) out.emplace(a.example_id, a);
  return out;
}

std::vector<ScoreRecord> RecordsFor(std::span<const ScoreRecord> records,
                                    std::span<const uint64_t> ids) {
  std::unordered_map<uint64_t, bool> keep;
  for (uint64_t id : ids) keep.emplace(id, true);
  std::vector<ScoreRecord> out;
  for (const ScoreRecord& r : records) {
    if (keep.contains(r.example_id)) out.push_back(r);
  }
  return out;
}

absl::Status AddFamily(AttackReport& report, const std::string& family,
                       std::span<const ScoreRecord> records) {
  DISTAUDIT_ASSIGN_OR_RETURN(FamilyResult result,
                             ScoreFamily(family, records));
  report.metrics["auc_" + family] = result.roc.auc;
  report.families.push_back(std::move(result));
  return absl::OkStatus();
}

// Argmax accuracy of models [begin, end) on probes [pbegin, pend).
absl::StatusOr<double> ProbeAccuracy(const LogitStore& store, size_t begin,
                                     size_t end, size_t pbegin, size_t pend,
                                     const Dataset& dataset) {
  if (pend <= pbegin || end <= begin) return 0.0;
  std::vector<uint64_t> ids(store.probe_ids.begin() + pbegin,
                            store.probe_ids.begin() + pend);
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<int> labels, LabelsOf(dataset, ids));
  size_t correct = 0;
  for (size_t m = begin; m < end; ++m) {
    for (size_t p = pbegin; p < pend; ++p) {
      size_t best = 0;
      for (size_t c = 1; c < store.num_classes; ++c) {
        if (store.Logit(m, p, c) > store.Logit(m, p, best)) best = c;
      }
      if (static_cast<int>(best) == labels[p - pbegin]) ++correct;
    }
  }
  return static_cast<double>(correct) /
         static_cast<double>((end - begin) * (pend - pbegin));
}

AttackReport NewReport(const std::string& name, const ExperimentContext& ctx) {
  AttackReport report;
  report.experiment = name;
  report.config_echo = ConfigEcho(ctx.config());
  report.master_seed = ctx.config().seed;
  report.calibration_models = ctx.config().calibration_models;
  report.evaluation_models = ctx.config().evaluation_models;
  return report;
}

void Use(AttackReport& report, const Population& pop) {
  for (const PopulationInfo& p : report.populations) {
    if (p.name == pop.name) return;
  }
  report.populations.push_back(pop.Info());
}

double Mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Standard error of the mean, sample standard deviation.
double StandardError(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

// Teacher direct-LiRA per-example accuracy over the teacher pool of the
// main teacher population.
absl::StatusOr<std::vector<ScoreRecord>> TeacherDirectRecords(
    ExperimentContext& ctx, const Population& pop) {
  const size_t t = ctx.split().teacher_ids.size();
  return DirectAttack(pop.Calibration().SliceProbes(0, t),
                      pop.Evaluation().SliceProbes(0, t), *pop.spec.dataset,
                      MakeLiraOptions(ctx.config()), "teacher");
}

// Student-query attack on a teacher-only population whose probes hold the
// teacher pool first and the queries at [qbegin, qend).
absl::StatusOr<StudentQueryResult> QueryAttack(ExperimentContext& ctx,
                                               const Population& pop,
                                               size_t qbegin, size_t qend,
                                               LabelMode mode, bool filter,
                                               const std::string& family) {
  const Dataset& data = *pop.spec.dataset;
  const LogitStore cal = pop.Calibration().SliceProbes(qbegin, qend);
  const LogitStore tgt = pop.Evaluation().SliceProbes(qbegin, qend);
  const MembershipPlan cal_plan = pop.CalibrationPlan();
  const MembershipPlan tgt_plan = pop.EvaluationPlan();
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<int> teacher_labels,
                             LabelsOf(data, cal_plan.pool_ids()));
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<int> query_labels,
                             LabelsOf(data, cal.probe_ids));
  return StudentQueryAttack(cal, cal_plan, teacher_labels, query_labels, tgt,
                            &tgt_plan,
                            MakeQueryOptions(ctx.config(), mode, filter),
                            family);
}

absl::StatusOr<std::vector<uint64_t>> PickTargets(
    ExperimentContext& ctx,
    const std::unordered_map<uint64_t, ExampleAccuracy>& baseline) {
  const auto& pool = ctx.split().teacher_ids;
  std::vector<double> vuln(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    vuln[i] = baseline.at(pool[i]).accuracy;
  }
  return SelectStratifiedTargets(pool, vuln, ctx.config().targets,
                                 DeriveSeed(ctx.config().seed, kTargetStream));
}

}  // namespace

LogitStore Population::Calibration() const {
  return store.SliceModels(0, calibration_models);
}

LogitStore Population::Evaluation() const {
  return store.SliceModels(calibration_models, store.num_models);
}

MembershipPlan Population::CalibrationPlan() const {
  return spec.plan.SliceModels(0, calibration_models);
}

MembershipPlan Population::EvaluationPlan() const {
  return spec.plan.SliceModels(calibration_models, store.num_models);
}

PopulationInfo Population::Info() const {
  return PopulationInfo{name, FamilyName(spec.family), store.num_models,
                        store.num_probe, spec.master_seed};
}

const FamilyResult* AttackReport::Family(const std::string& name) const {
  for (const FamilyResult& f : families) {
    if (f.family == name) return &f;
  }
  return nullptr;
}

double AttackReport::Metric(const std::string& name) const {
  auto it = metrics.find(name);
  return it == metrics.end() ? std::nan("") : it->second;
}

size_t AttackReport::ModelsUsed() const {
  size_t n = extra_models;
  for (const PopulationInfo& p : populations) n += p.models;
  return n;
}

absl::StatusOr<std::unique_ptr<ExperimentContext>> ExperimentContext::Create(
    ExperimentConfig config) {
  DISTAUDIT_RETURN_IF_ERROR(config.Validate());
  std::unique_ptr<ExperimentContext> ctx(new ExperimentContext);
  ctx->config_ = std::move(config);
  const ExperimentConfig& cfg = ctx->config_;
  Dataset data;
  if (cfg.data_csv.empty()) {
    DISTAUDIT_ASSIGN_OR_RETURN(
        data, GenSyntheticMixture(cfg.classes, cfg.dims, cfg.per_class,
                                  cfg.spread, cfg.data_seed));
  } else {
    DISTAUDIT_ASSIGN_OR_RETURN(data, LoadCsvTabular(cfg.data_csv, cfg.classes));
  }
  ctx->dataset_ = std::make_shared<const Dataset>(std::move(data));
  DISTAUDIT_ASSIGN_OR_RETURN(
      ctx->split_,
      SplitTeacherStudent(*ctx->dataset_, cfg.teacher_pool, cfg.student_pool,
                          cfg.split_seed, false));
  const auto& held = ctx->split_.held_out_ids;
  if (held.size() < cfg.surrogate_pool) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "surrogate_pool %d exceeds the %d held-out examples",
        cfg.surrogate_pool, held.size()));
  }
  ctx->surrogate_ids_.assign(held.begin(), held.begin() + cfg.surrogate_pool);
  ctx->test_ids_.assign(held.begin() + cfg.surrogate_pool, held.end());
  return ctx;
}

PipelineConfig ExperimentContext::BasePipeline() const {
  PipelineConfig p;
  p.teacher.hidden_width = config_.hidden;
  p.teacher.epochs = config_.epochs;
  p.teacher.learning_rate = config_.learning_rate;
  p.teacher.momentum = config_.momentum;
  p.teacher.batch_size = config_.batch_size;
  p.student = p.teacher;
  p.student.temperature = config_.temperature;
  p.student.gradient_rescale = config_.gradient_rescale;
  p.student.alpha = config_.alpha;
  return p;
}

absl::StatusOr<const Population*> ExperimentContext::GetPopulation(
    const std::string& name,
    const std::function<absl::StatusOr<ShadowRunSpec>()>& plan,
    size_t models) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second.get();
  DISTAUDIT_ASSIGN_OR_RETURN(ShadowRunSpec spec, plan());
  if (models != 0 && models < spec.num_models()) {
    spec = spec.SliceModels(0, models);
  }
  auto pop = std::make_unique<Population>();
  pop->name = name;
  pop->calibration_models =
      std::min(config_.calibration_models, spec.num_models());
  const auto start = Clock::now();
  DISTAUDIT_ASSIGN_OR_RETURN(pop->store, ExecuteRuns(spec, config_.workers));
  pop->seconds = Seconds(start);
  pop->spec = std::move(spec);
  models_trained_ += pop->store.num_models;
  const Population* out = pop.get();
  cache_.emplace(name, std::move(pop));
  return out;
}

absl::StatusOr<const Population*> ExperimentContext::TeacherPopulation() {
  return GetPopulation("teacher-only", [&]() {
    PlanRunsInput in;
    in.family = ShadowFamily::kTeacherOnly;
    in.dataset = dataset_;
    in.split = split_;
    in.num_models = config_.calibration_models + config_.evaluation_models;
    in.master_seed = config_.seed;
    in.probe_ids = Concat(split_.teacher_ids, split_.student_ids, test_ids_);
    in.pipeline = BasePipeline();
    return PlanRuns(std::move(in));
  });
}

absl::StatusOr<const Population*> ExperimentContext::EndToEndPopulation(
    double h) {
  return GetPopulation("end-to-end-H" + Tag(h), [&]() {
    PlanRunsInput in;
    in.family = ShadowFamily::kEndToEnd;
    in.dataset = dataset_;
    in.split = split_;
    in.num_models = config_.calibration_models + config_.evaluation_models;
    in.master_seed = config_.seed;
    in.probe_ids = Concat(split_.teacher_ids, test_ids_);
    in.pipeline = BasePipeline();
    in.pipeline.student.temperature = h;
    return PlanRuns(std::move(in));
  });
}

absl::StatusOr<std::vector<uint64_t>> SelectStratifiedTargets(
    std::span<const uint64_t> ids, std::span<const double> vulnerability,
    size_t count, uint64_t seed) {
  if (ids.size() != vulnerability.size()) {
    return absl::InvalidArgumentError("one vulnerability per ID");
  }
  if (count == 0 || count > ids.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "cannot pick %d targets from %d examples", count, ids.size()));
  }
  std::vector<size_t> order(ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return vulnerability[a] < vulnerability[b];
  });
  constexpr size_t kBins = 10;
  std::mt19937_64 rng(seed);
  std::vector<uint64_t> out;
  std::vector<size_t> leftovers;
  for (size_t b = 0; b < kBins; ++b) {
    const size_t lo = order.size() * b / kBins;
    const size_t hi = order.size() * (b + 1) / kBins;
    std::vector<size_t> bin(order.begin() + lo, order.begin() + hi);
    std::shuffle(bin.begin(), bin.end(), rng);
    const size_t want = count / kBins + (b < count % kBins ? 1 : 0);
    const size_t take = std::min(want, bin.size());
    for (size_t i = 0; i < take; ++i) out.push_back(ids[bin[i]]);
    leftovers.insert(leftovers.end(), bin.begin() + take, bin.end());
  }
  // Small pools: top up from whatever was not taken.
  std::shuffle(leftovers.begin(), leftovers.end(), rng);
  for (size_t i = 0; out.size() < count; ++i) out.push_back(ids[leftovers[i]]);
  return out;
}

absl::StatusOr<FamilyResult> ScoreFamily(
    const std::string& family, std::span<const ScoreRecord> records) {
  FamilyResult result;
  result.family = family;
  DISTAUDIT_ASSIGN_OR_RETURN(result.roc, ComputeRoc(records));
  for (double fpr : kReportedFprs) {
    result.tpr_at_fpr.emplace_back(fpr, TprAtFpr(result.roc, fpr));
  }
  return result;
}

absl::StatusOr<AttackReport> ExpTeacherPrivacy(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("teacher-privacy", ctx);
  const ExperimentConfig& cfg = ctx.config();
  DISTAUDIT_ASSIGN_OR_RETURN(const Population* tp, ctx.TeacherPopulation());
  DISTAUDIT_ASSIGN_OR_RETURN(const Population* e2e,
                             ctx.EndToEndPopulation(cfg.temperature));
  Use(report, *tp);
  Use(report, *e2e);
  const Dataset& data = *ctx.dataset();
  const size_t t = ctx.split().teacher_ids.size();
  const LogitStore t_cal = tp->Calibration().SliceProbes(0, t);
  const LogitStore e_cal = e2e->Calibration().SliceProbes(0, t);
  const LogitStore e_eval = e2e->Evaluation().SliceProbes(0, t);
  const LiraOptions lira = MakeLiraOptions(cfg);

  DISTAUDIT_ASSIGN_OR_RETURN(auto teacher, TeacherDirectRecords(ctx, *tp));
  DISTAUDIT_ASSIGN_OR_RETURN(
      auto end_to_end, DirectAttack(e_cal, e_eval, data, lira, "end-to-end"));
  DISTAUDIT_ASSIGN_OR_RETURN(
      auto transfer, DirectAttack(t_cal, e_eval, data, lira, "transfer"));
  DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix e_obs,
                             CorrectClassObservations(e_eval, data));
  const auto baseline = LogitThresholdBaseline(e_obs, "logit-baseline");
  DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, "teacher", teacher));
  DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, "end-to-end", end_to_end));
  DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, "transfer", transfer));
  DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, "logit-baseline", baseline));

  DISTAUDIT_ASSIGN_OR_RETURN(auto t_acc, PerExampleAccuracy(teacher));
  DISTAUDIT_ASSIGN_OR_RETURN(auto s_acc, PerExampleAccuracy(end_to_end));
  DISTAUDIT_ASSIGN_OR_RETURN(auto tr_acc, PerExampleAccuracy(transfer));
  std::vector<double> x, y, z;
  for (size_t i = 0; i < t_acc.size(); ++i) {
    x.push_back(t_acc[i].accuracy);
    y.push_back(s_acc[i].accuracy);
    z.push_back(tr_acc[i].accuracy);
    report.per_example.push_back({t_acc[i].example_id, x.back(), y.back(),
                                  t_acc[i].n_in, t_acc[i].n_out});
  }
  DISTAUDIT_ASSIGN_OR_RETURN(report.metrics["spearman"], Spearman(x, y));
  DISTAUDIT_ASSIGN_OR_RETURN(report.metrics["spearman_transfer"],
                             Spearman(x, z));
  report.metrics["mean_teacher_acc"] = Mean(x);
  report.metrics["mean_student_acc"] = Mean(y);
  report.metrics["mean_transfer_acc"] = Mean(z);

  const size_t n_test = ctx.test_ids().size();
  if (n_test > 0) {
    const size_t s = ctx.split().student_ids.size();
    DISTAUDIT_ASSIGN_OR_RETURN(
        report.metrics["teacher_test_accuracy"],
        ProbeAccuracy(tp->store, tp->calibration_models, tp->store.num_models,
                      t + s, t + s + n_test, data));
    DISTAUDIT_ASSIGN_OR_RETURN(
        report.metrics["student_test_accuracy"],
        ProbeAccuracy(e2e->store, e2e->calibration_models,
                      e2e->store.num_models, t, t + n_test, data));
  }
  report.details["default_calibration_models"] = kDefaultCalibrationModels;
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpStudentQuery(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("student-query", ctx);
  DISTAUDIT_ASSIGN_OR_RETURN(const Population* tp, ctx.TeacherPopulation());
  Use(report, *tp);
  const size_t t = ctx.split().teacher_ids.size();
  const size_t s = ctx.split().student_ids.size();

  struct Cell {
    const char* family;
    LabelMode mode;
    bool filter;
  };
  const Cell cells[] = {
      {"label-filtered", LabelMode::kTeacherLabel, true},
      {"label-all", LabelMode::kTeacherLabel, false},
      {"lira-filtered", LabelMode::kStudentLabel, true},
      {"lira-all", LabelMode::kStudentLabel, false},
  };
  std::vector<ScoreRecord> best;
  std::vector<std::vector<size_t>> selected;
  for (const Cell& cell : cells) {
    DISTAUDIT_ASSIGN_OR_RETURN(
        StudentQueryResult r,
        QueryAttack(ctx, *tp, t, t + s, cell.mode, cell.filter, cell.family));
    DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, cell.family, r.records));
    if (best.empty()) {
      best = std::move(r.records);
      selected = std::move(r.selected);
    }
  }

  DISTAUDIT_ASSIGN_OR_RETURN(auto teacher, TeacherDirectRecords(ctx, *tp));
  DISTAUDIT_ASSIGN_OR_RETURN(auto t_acc, PerExampleAccuracy(teacher));
  DISTAUDIT_ASSIGN_OR_RETURN(auto q_acc, PerExampleAccuracy(best));
  std::vector<double> x, y;
  for (size_t i = 0; i < t_acc.size(); ++i) {
    x.push_back(t_acc[i].accuracy);
    y.push_back(q_acc[i].accuracy);
    report.per_example.push_back({t_acc[i].example_id, x.back(), y.back(),
                                  t_acc[i].n_in, t_acc[i].n_out});
  }
  report.metrics["mean_teacher_acc"] = Mean(x);
  report.metrics["mean_query_acc"] = Mean(y);
  DISTAUDIT_ASSIGN_OR_RETURN(report.metrics["spearman"], Spearman(x, y));

  nlohmann::json top = nlohmann::json::array();
  const auto& queries = ctx.split().student_ids;
  const auto& pool = ctx.split().teacher_ids;
  for (size_t j = 0; j < pool.size(); ++j) {
    std::vector<uint64_t> ids;
    for (size_t i : selected[j]) ids.push_back(queries[i]);
    top.push_back({{"id", pool[j]}, {"queries", ids}});
  }
  report.details["k"] = ctx.config().k;
  report.details["top_queries"] = std::move(top);
  report.details["profile_models"] = kStudentQueryProfileModels;
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpDuplication(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("duplication", ctx);
  const ExperimentConfig& cfg = ctx.config();
  DISTAUDIT_ASSIGN_OR_RETURN(const Population* tp, ctx.TeacherPopulation());
  Use(report, *tp);
  const size_t t = ctx.split().teacher_ids.size();
  const size_t s = ctx.split().student_ids.size();

  DISTAUDIT_ASSIGN_OR_RETURN(auto teacher, TeacherDirectRecords(ctx, *tp));
  DISTAUDIT_ASSIGN_OR_RETURN(auto baseline, AccuracyById(teacher));
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<uint64_t> targets,
                             PickTargets(ctx, baseline));

  DISTAUDIT_ASSIGN_OR_RETURN(
      StudentQueryResult dedup,
      QueryAttack(ctx, *tp, t, t + s, LabelMode::kTeacherLabel, true,
                  "student-query-dedup"));
  std::vector<ScoreRecord> dedup_records = RecordsFor(dedup.records, targets);
  std::vector<ScoreRecord> dup_records;
  nlohmann::json copies = nlohmann::json::array();
  if (cfg.duplicate_copies == 0) {
    dup_records = dedup_records;
    for (ScoreRecord& r : dup_records) r.family = "student-query-dup";
  } else {
    std::vector<uint64_t> repeated;
    for (size_t c = 0; c < cfg.duplicate_copies; ++c) {
      repeated.insert(repeated.end(), targets.begin(), targets.end());
    }
    DISTAUDIT_ASSIGN_OR_RETURN(
        DuplicatedSplit dup,
        InjectDuplicates(ctx.split(), repeated, *ctx.dataset()));
    for (const auto& [target, copy] : dup.copies) {
      copies.push_back({target, copy});
    }
    auto dup_data = std::make_shared<const Dataset>(std::move(dup.dataset));
    const SplitSpec dup_split = std::move(dup.split);
    const std::string name =
        absl::StrCat("duplication-x", cfg.duplicate_copies);
    DISTAUDIT_ASSIGN_OR_RETURN(
        const Population* pop,
        ctx.GetPopulation(name, [&]() {
          PlanRunsInput in;
          in.family = ShadowFamily::kTeacherOnly;
          in.dataset = dup_data;
          in.split = dup_split;
          in.num_models = cfg.calibration_models + cfg.evaluation_models;
          in.master_seed = cfg.seed;
          in.probe_ids = dup_split.student_ids;
          in.pipeline = ctx.BasePipeline();
          return PlanRuns(std::move(in));
        }));
    Use(report, *pop);
    DISTAUDIT_ASSIGN_OR_RETURN(
        StudentQueryResult dup_result,
        QueryAttack(ctx, *pop, 0, pop->store.num_probe,
                    LabelMode::kTeacherLabel, true, "student-query-dup"));
    dup_records = RecordsFor(dup_result.records, targets);
  }
  DISTAUDIT_RETURN_IF_ERROR(
      AddFamily(report, "student-query-dedup", dedup_records));
  DISTAUDIT_RETURN_IF_ERROR(
      AddFamily(report, "student-query-dup", dup_records));

  DISTAUDIT_ASSIGN_OR_RETURN(auto dedup_acc, AccuracyById(dedup_records));
  DISTAUDIT_ASSIGN_OR_RETURN(auto dup_acc, AccuracyById(dup_records));
  std::vector<double> x, y_dedup, y_dup;
  size_t wins = 0, losses = 0;
  nlohmann::json pairs = nlohmann::json::array();
  for (uint64_t id : targets) {
    const ExampleAccuracy& b = baseline.at(id);
    const double a0 = dedup_acc.at(id).accuracy;
    const double a1 = dup_acc.at(id).accuracy;
    x.push_back(b.accuracy);
    y_dedup.push_back(a0);
    y_dup.push_back(a1);
    if (a1 > a0) ++wins;
    if (a1 < a0) ++losses;
    report.per_example.push_back({id, b.accuracy, a1, b.n_in, b.n_out});
    pairs.push_back({{"id", id},
                     {"teacher_acc", b.accuracy},
                     {"dedup_acc", a0},
                     {"dup_acc", a1}});
  }
  report.metrics["mean_acc_dedup"] = Mean(y_dedup);
  report.metrics["mean_acc_dup"] = Mean(y_dup);
  report.metrics["sign_wins"] = static_cast<double>(wins);
  report.metrics["sign_losses"] = static_cast<double>(losses);
  report.metrics["sign_test_p"] = SignTestPValue(wins, losses);
  auto chow = ChowTest(x, y_dedup, x, y_dup);
  if (chow.ok()) {
    report.metrics["chow_f"] = chow->f_statistic;
    report.metrics["chow_p"] = chow->p_value;
  } else {
    report.details["chow_error"] = std::string(chow.status().message());
  }
  report.details["targets"] = std::move(pairs);
  report.details["copies"] = std::move(copies);
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpPoisoning(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("poisoning", ctx);
  const ExperimentConfig& cfg = ctx.config();
  DISTAUDIT_ASSIGN_OR_RETURN(const Population* tp, ctx.TeacherPopulation());
  const size_t t = ctx.split().teacher_ids.size();
  const size_t s = ctx.split().student_ids.size();
  DISTAUDIT_ASSIGN_OR_RETURN(auto base_records, TeacherDirectRecords(ctx, *tp));
  DISTAUDIT_ASSIGN_OR_RETURN(auto baseline, AccuracyById(base_records));
  DISTAUDIT_ASSIGN_OR_RETURN(std::vector<uint64_t> targets,
                             PickTargets(ctx, baseline));
  std::unordered_map<uint64_t, bool> is_target;
  for (uint64_t id : targets) is_target.emplace(id, true);

  struct Arm {
    size_t r;
    std::vector<double> teacher, query, control;
  };
  std::vector<Arm> arms;
  nlohmann::json arm_json = nlohmann::json::array();
  for (size_t r : cfg.replicas) {
    const Population* pop = tp;
    if (r > 0) {
      Dataset poisoned = *ctx.dataset();
      std::vector<uint64_t> poison_ids;
      for (size_t i = 0; i < targets.size(); ++i) {
        DISTAUDIT_ASSIGN_OR_RETURN(
            poisoned, PoisonLabelFlip(poisoned, targets[i], r,
                                      DeriveSeed(cfg.seed, kPoisonStream + i)));
        for (size_t k = poisoned.size() - r; k < poisoned.size(); ++k) {
          poison_ids.push_back(poisoned.id(k));
        }
      }
      auto data = std::make_shared<const Dataset>(std::move(poisoned));
      DISTAUDIT_ASSIGN_OR_RETURN(
          pop, ctx.GetPopulation(absl::StrCat("poison-r", r), [&]() {
            PlanRunsInput in;
            in.family = ShadowFamily::kTeacherOnly;
            in.dataset = data;
            in.split = ctx.split();
            in.num_models = cfg.calibration_models + cfg.evaluation_models;
            in.master_seed = cfg.seed;
            in.probe_ids = Concat(ctx.split().teacher_ids,
                                  ctx.split().student_ids);
            in.pipeline = ctx.BasePipeline();
            in.pipeline.teacher_fixed_ids = poison_ids;
            return PlanRuns(std::move(in));
          }));
    }
    Use(report, *pop);
    DISTAUDIT_ASSIGN_OR_RETURN(auto teacher, TeacherDirectRecords(ctx, *pop));
    DISTAUDIT_ASSIGN_OR_RETURN(auto t_acc, AccuracyById(teacher));
    DISTAUDIT_ASSIGN_OR_RETURN(
        StudentQueryResult q,
        QueryAttack(ctx, *pop, t, t + s, LabelMode::kTeacherLabel, true,
                    absl::StrCat("student-query-r", r)));
    std::vector<ScoreRecord> target_records = RecordsFor(teacher, targets);
    for (ScoreRecord& rec : target_records) {
      rec.family = absl::StrCat("teacher-r", r);
    }
    DISTAUDIT_RETURN_IF_ERROR(
        AddFamily(report, absl::StrCat("teacher-r", r), target_records));
    std::vector<ScoreRecord> query_records = RecordsFor(q.records, targets);
    DISTAUDIT_RETURN_IF_ERROR(AddFamily(
        report, absl::StrCat("student-query-r", r), query_records));
    DISTAUDIT_ASSIGN_OR_RETURN(auto q_acc, AccuracyById(query_records));

    Arm arm{r, {}, {}, {}};
    for (uint64_t id : targets) {
      arm.teacher.push_back(t_acc.at(id).accuracy);
      arm.query.push_back(q_acc.at(id).accuracy);
    }
    for (uint64_t id : ctx.split().teacher_ids) {
      if (!is_target.contains(id)) arm.control.push_back(t_acc.at(id).accuracy);
    }
    const std::string suffix = absl::StrCat("_r", r);
    report.metrics["mean_teacher_acc" + suffix] = Mean(arm.teacher);
    report.metrics["se_teacher_acc" + suffix] = StandardError(arm.teacher);
    report.metrics["mean_query_acc" + suffix] = Mean(arm.query);
    report.metrics["mean_control_acc" + suffix] = Mean(arm.control);
    arm_json.push_back({{"replicas", r},
                        {"teacher_acc", arm.teacher},
                        {"query_acc", arm.query}});
    arms.push_back(std::move(arm));
  }

  // Paired differences between the largest and smallest replica counts.
  const auto [lo, hi] = std::minmax_element(
      arms.begin(), arms.end(),
      [](const Arm& a, const Arm& b) { return a.r < b.r; });
  auto paired = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
    return d;
  };
  const std::vector<double> gap = paired(lo->teacher, hi->teacher);
  const std::vector<double> control_gap = paired(lo->control, hi->control);
  report.metrics["teacher_gap"] = Mean(gap);
  report.metrics["teacher_gap_se"] = StandardError(gap);
  report.metrics["control_gap"] = Mean(control_gap);
  report.metrics["control_gap_se"] = StandardError(control_gap);
  std::vector<Arm*> sorted;
  for (Arm& a : arms) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(),
            [](const Arm* a, const Arm* b) { return a->r < b->r; });
  bool monotone = true;
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (Mean(sorted[i]->teacher) < Mean(sorted[i - 1]->teacher)) {
      monotone = false;
    }
  }
  report.metrics["teacher_acc_nondecreasing"] = monotone ? 1.0 : 0.0;

  for (size_t i = 0; i < targets.size(); ++i) {
    const ExampleAccuracy& b = baseline.at(targets[i]);
    report.per_example.push_back(
        {targets[i], hi->teacher[i], hi->query[i], b.n_in, b.n_out});
  }
  report.details["targets"] = targets;
  report.details["arms"] = std::move(arm_json);
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpTemperature(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("temperature", ctx);
  const ExperimentConfig& cfg = ctx.config();
  const Dataset& data = *ctx.dataset();
  const size_t t = ctx.split().teacher_ids.size();
  const size_t n_test = ctx.test_ids().size();
  nlohmann::json grid = nlohmann::json::array();
  std::optional<double> reference_h;
  for (double h : cfg.temperatures) {
    if (!reference_h || std::abs(h - cfg.temperature) <
                            std::abs(*reference_h - cfg.temperature)) {
      reference_h = h;
    }
  }
  for (double h : cfg.temperatures) {
    DISTAUDIT_ASSIGN_OR_RETURN(const Population* pop,
                               ctx.EndToEndPopulation(h));
    Use(report, *pop);
    const std::string family = "end-to-end-H" + Tag(h);
    DISTAUDIT_ASSIGN_OR_RETURN(
        auto records,
        DirectAttack(pop->Calibration().SliceProbes(0, t),
                     pop->Evaluation().SliceProbes(0, t), data,
                     MakeLiraOptions(cfg), family));
    DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, family, records));
    DISTAUDIT_ASSIGN_OR_RETURN(
        double acc, ProbeAccuracy(pop->store, pop->calibration_models,
                                  pop->store.num_models, t, t + n_test, data));
    report.metrics["student_test_accuracy_H" + Tag(h)] = acc;
    const FamilyResult& f = report.families.back();
    grid.push_back({{"temperature", h},
                    {"auc", f.roc.auc},
                    {"tpr_at_1e-3", TprAtFpr(f.roc, 1e-3)},
                    {"student_test_accuracy", acc}});
    if (h == *reference_h) {
      DISTAUDIT_ASSIGN_OR_RETURN(auto acc_rows, PerExampleAccuracy(records));
      for (const ExampleAccuracy& a : acc_rows) {
        report.per_example.push_back(
            {a.example_id, std::nullopt, a.accuracy, a.n_in, a.n_out});
      }
    }
  }
  report.details["grid"] = std::move(grid);
  report.details["gradient_rescale"] = cfg.gradient_rescale;
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpPrivateStudent(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("private-student", ctx);
  const ExperimentConfig& cfg = ctx.config();
  const Dataset& data = *ctx.dataset();
  const PipelineConfig base = ctx.BasePipeline();
  const size_t n_teachers = cfg.candidate_teachers;

  DISTAUDIT_ASSIGN_OR_RETURN(
      std::vector<ModelParams> candidates,
      PrivateStudentTeachers(ctx, TeacherKnowledge::kCandidateSet));
  DISTAUDIT_ASSIGN_OR_RETURN(
      std::vector<ModelParams> surrogates,
      PrivateStudentTeachers(ctx, TeacherKnowledge::kSurrogate));
  report.extra_models = 2 * n_teachers;

  const uint64_t master = DeriveSeed(cfg.seed, kPrivateStudentStream);
  auto plan = [&](TeacherKnowledge knowledge,
                  std::vector<ModelParams> teachers) {
    return [&, knowledge, teachers]() {
      PlanRunsInput in;
      in.family = ShadowFamily::kPrivateStudent;
      in.dataset = ctx.dataset();
      in.split = ctx.split();
      in.num_models = cfg.calibration_models + cfg.evaluation_models;
      in.master_seed = master;
      in.probe_ids = ctx.split().student_ids;
      in.pipeline = base;
      in.knowledge = knowledge;
      in.teachers = teachers;
      return PlanRuns(std::move(in));
    };
  };
  const std::string prefix =
      absl::StrCat("private-student-T", n_teachers, "-");
  DISTAUDIT_ASSIGN_OR_RETURN(
      const Population* known,
      ctx.GetPopulation(prefix + "known",
                        plan(TeacherKnowledge::kKnown, {candidates[0]})));
  DISTAUDIT_ASSIGN_OR_RETURN(
      const Population* unknown,
      ctx.GetPopulation(prefix + "candidate-set",
                        plan(TeacherKnowledge::kCandidateSet, candidates),
                        cfg.calibration_models));
  DISTAUDIT_ASSIGN_OR_RETURN(
      const Population* surrogate,
      ctx.GetPopulation(prefix + "surrogate",
                        plan(TeacherKnowledge::kSurrogate, surrogates),
                        cfg.calibration_models));
  const LogitStore targets = known->Evaluation();
  const LiraOptions lira = MakeLiraOptions(cfg);
  std::vector<ScoreRecord> known_records;
  for (const auto& [family, pop] :
       {std::pair<const char*, const Population*>{"known", known},
        {"unknown", unknown},
        {"surrogate", surrogate}}) {
    Use(report, *pop);
    DISTAUDIT_ASSIGN_OR_RETURN(
        auto records,
        DirectAttack(pop->Calibration(), targets, data, lira, family));
    DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, family, records));
    if (known_records.empty()) known_records = std::move(records);
  }
  DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix target_obs,
                             CorrectClassObservations(targets, data));
  DISTAUDIT_RETURN_IF_ERROR(
      AddFamily(report, "logit-baseline",
                LogitThresholdBaseline(target_obs, "logit-baseline")));
  DISTAUDIT_ASSIGN_OR_RETURN(auto acc_rows, PerExampleAccuracy(known_records));
  for (const ExampleAccuracy& a : acc_rows) {
    report.per_example.push_back(
        {a.example_id, std::nullopt, a.accuracy, a.n_in, a.n_out});
  }
  const size_t n_test = ctx.test_ids().size();
  if (n_test > 0) {
    DISTAUDIT_ASSIGN_OR_RETURN(Subset test, data.Gather(ctx.test_ids()));
    report.metrics["teacher_test_accuracy"] =
        Accuracy(candidates[0], test.features, test.labels);
    report.metrics["surrogate_test_accuracy"] =
        Accuracy(surrogates[0], test.features, test.labels);
  }
  report.details["candidate_teachers"] = n_teachers;
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<AttackReport> ExpSelfDistill(ExperimentContext& ctx) {
  const auto start = Clock::now();
  AttackReport report = NewReport("self-distill", ctx);
  const ExperimentConfig& cfg = ctx.config();
  const Dataset& data = *ctx.dataset();
  DISTAUDIT_ASSIGN_OR_RETURN(
      SplitSpec shared,
      SplitTeacherStudent(data, cfg.teacher_pool, cfg.teacher_pool,
                          cfg.split_seed, true));
  nlohmann::json grid = nlohmann::json::array();
  for (double alpha : cfg.alphas) {
    DISTAUDIT_ASSIGN_OR_RETURN(
        const Population* pop,
        ctx.GetPopulation("self-distill-a" + Tag(alpha), [&]() {
          PlanRunsInput in;
          in.family = ShadowFamily::kSelfDistill;
          in.dataset = ctx.dataset();
          in.split = shared;
          in.num_models = cfg.calibration_models + cfg.evaluation_models;
          in.master_seed = cfg.seed;
          in.probe_ids = shared.teacher_ids;
          in.pipeline = ctx.BasePipeline();
          in.pipeline.student.alpha = alpha;
          return PlanRuns(std::move(in));
        }));
    Use(report, *pop);
    const std::string family = "self-distill-a" + Tag(alpha);
    DISTAUDIT_ASSIGN_OR_RETURN(
        auto records, DirectAttack(pop->Calibration(), pop->Evaluation(),
                                   data, MakeLiraOptions(cfg), family));
    DISTAUDIT_RETURN_IF_ERROR(AddFamily(report, family, records));
    grid.push_back({{"alpha", alpha}, {"auc", report.families.back().roc.auc}});
    if (alpha == cfg.alphas.back()) {
      report.per_example.clear();
      DISTAUDIT_ASSIGN_OR_RETURN(auto acc_rows, PerExampleAccuracy(records));
      for (const ExampleAccuracy& a : acc_rows) {
        report.per_example.push_back(
            {a.example_id, std::nullopt, a.accuracy, a.n_in, a.n_out});
      }
    }
  }
  report.details["grid"] = std::move(grid);
  report.wall_seconds = Seconds(start);
  return report;
}

absl::StatusOr<std::vector<ModelParams>> PrivateStudentTeachers(
    const ExperimentContext& ctx, TeacherKnowledge knowledge) {
  const ExperimentConfig& cfg = ctx.config();
  const Dataset& data = *ctx.dataset();
  std::span<const uint64_t> ids = ctx.split().teacher_ids;
  uint64_t stream = kTeacherStream;
  size_t count = cfg.candidate_teachers;
  if (knowledge == TeacherKnowledge::kKnown) count = 1;
  if (knowledge == TeacherKnowledge::kSurrogate) {
    if (ctx.surrogate_ids().empty()) {
      return absl::FailedPreconditionError(
          "surrogate teachers need a non-empty surrogate split");
    }
    ids = ctx.surrogate_ids();
    stream = kSurrogateStream;
  }
  DISTAUDIT_ASSIGN_OR_RETURN(Subset subset, data.Gather(ids));
  std::vector<ModelParams> teachers;
  for (size_t i = 0; i < count; ++i) {
    TrainConfig tc = ctx.BasePipeline().teacher;
    tc.seed = DeriveSeed(cfg.seed, stream + i);
    DISTAUDIT_ASSIGN_OR_RETURN(ModelParams m,
                               TrainTeacher(subset, data.classes(), tc));
    teachers.push_back(std::move(m));
  }
  return teachers;
}

std::vector<uint64_t> StandaloneProbes(const ExperimentContext& ctx,
                                       ShadowFamily family) {
  const SplitSpec& split = ctx.split();
  switch (family) {
    case ShadowFamily::kStudentQuery:
      return Concat(split.teacher_ids, split.student_ids);
    case ShadowFamily::kPrivateStudent:
      return split.student_ids;
    default:
      return split.teacher_ids;
  }
}

absl::StatusOr<ShadowRunSpec> PlanFamilyRuns(const ExperimentContext& ctx,
                                             ShadowFamily family,
                                             size_t num_models,
                                             uint64_t master_seed,
                                             TeacherKnowledge knowledge) {
  PlanRunsInput in;
  in.family = family;
  in.dataset = ctx.dataset();
  in.split = ctx.split();
  in.num_models = num_models;
  in.master_seed = master_seed;
  in.probe_ids = StandaloneProbes(ctx, family);
  in.pipeline = ctx.BasePipeline();
  in.knowledge = knowledge;
  if (family == ShadowFamily::kSelfDistill) {
    DISTAUDIT_ASSIGN_OR_RETURN(
        in.split,
        SplitTeacherStudent(*ctx.dataset(), ctx.config().teacher_pool,
                            ctx.config().teacher_pool,
                            ctx.config().split_seed, true));
  }
  if (family == ShadowFamily::kPrivateStudent) {
    DISTAUDIT_ASSIGN_OR_RETURN(in.teachers,
                               PrivateStudentTeachers(ctx, knowledge));
  }
  return PlanRuns(std::move(in));
}

const std::vector<std::string>& ExperimentNames() {
  static const auto* names = new std::vector<std::string>{
      "teacher-privacy", "student-query",   "duplication", "poisoning",
      "temperature",     "private-student", "self-distill"};
  return *names;
}

absl::StatusOr<AttackReport> RunExperiment(const std::string& name,
                                           ExperimentContext& ctx) {
  if (name == "teacher-privacy") return ExpTeacherPrivacy(ctx);
  if (name == "student-query") return ExpStudentQuery(ctx);
  if (name == "duplication") return ExpDuplication(ctx);
  if (name == "poisoning") return ExpPoisoning(ctx);
  if (name == "temperature") return ExpTemperature(ctx);
  if (name == "private-student") return ExpPrivateStudent(ctx);
  if (name == "self-distill") return ExpSelfDistill(ctx);
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown experiment '%s'; valid names: %s", name,
                      absl::StrJoin(ExperimentNames(), ", ")));
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string SafeName(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

nlohmann::json JsonNumber(double v) {
  if (std::isfinite(v)) return v;
  return FormatDouble(v);
}

absl::Status WriteText(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) {
    return absl::UnavailableError(
        absl::StrFormat("cannot write '%s'", path.string()));
  }
  return absl::OkStatus();
}

}  // namespace

nlohmann::json ReportToJson(const AttackReport& report) {
  nlohmann::json j;
  j["experiment"] = report.experiment;
  j["master_seed"] = report.master_seed;
  j["calibration_models"] = report.calibration_models;
  j["evaluation_models"] = report.evaluation_models;
  j["models_used"] = report.ModelsUsed();
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : report.metrics) metrics[k] = JsonNumber(v);
  j["metrics"] = std::move(metrics);
  nlohmann::json families = nlohmann::json::array();
  for (const FamilyResult& f : report.families) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [fpr, tpr] : f.tpr_at_fpr) {
      table.push_back({{"fpr", fpr}, {"tpr", tpr}});
    }
    families.push_back({{"family", f.family},
                        {"auc", f.roc.auc},
                        {"num_scores", f.roc.num_scores},
                        {"positives", f.roc.positives},
                        {"negatives", f.roc.negatives},
                        {"roc_points", f.roc.points.size()},
                        {"roc_csv", "roc_" + SafeName(f.family) + ".csv"},
                        {"tpr_at_fpr", std::move(table)}});
  }
  j["families"] = std::move(families);
  nlohmann::json pops = nlohmann::json::array();
  for (const PopulationInfo& p : report.populations) {
    pops.push_back({{"name", p.name},
                    {"family", p.family},
                    {"models", p.models},
                    {"probes", p.probes},
                    {"master_seed", p.master_seed}});
  }
  j["populations"] = std::move(pops);
  j["extra_models"] = report.extra_models;
  nlohmann::json rows = nlohmann::json::array();
  for (const PerExampleRow& r : report.per_example) {
    rows.push_back(
        {{"id", r.id},
         {"teacher_acc", r.teacher_acc ? nlohmann::json(*r.teacher_acc)
                                       : nlohmann::json(nullptr)},
         {"student_acc", r.student_acc ? nlohmann::json(*r.student_acc)
                                       : nlohmann::json(nullptr)},
         {"n_in", r.n_in},
         {"n_out", r.n_out}});
  }
  j["per_example"] = std::move(rows);
  j["details"] = report.details;
  j["config"] = report.config_echo;
  return j;
}

absl::Status WriteReport(const AttackReport& report, const std::string& dir,
                         const ExperimentContext* ctx) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::UnavailableError(absl::StrFormat(
        "cannot create report directory '%s': %s", dir, ec.message()));
  }
  const fs::path root(dir);
  DISTAUDIT_RETURN_IF_ERROR(
      WriteText(root / "report.json", ReportToJson(report).dump(2) + "\n"));
  for (const FamilyResult& f : report.families) {
    std::string csv = "fpr,tpr\n";
    for (const RocPoint& p : f.roc.points) {
      absl::StrAppend(&csv, FormatDouble(p.fpr), ",", FormatDouble(p.tpr),
                      "\n");
    }
    DISTAUDIT_RETURN_IF_ERROR(
        WriteText(root / ("roc_" + SafeName(f.family) + ".csv"), csv));
  }
  std::string csv = "id,teacher_acc,student_acc,n_in,n_out\n";
  for (const PerExampleRow& r : report.per_example) {
    absl::StrAppend(&csv, r.id, ",",
                    r.teacher_acc ? FormatDouble(*r.teacher_acc) : "", ",",
                    r.student_acc ? FormatDouble(*r.student_acc) : "", ",",
                    r.n_in, ",", r.n_out, "\n");
  }
  DISTAUDIT_RETURN_IF_ERROR(WriteText(root / "per_example.csv", csv));
  DISTAUDIT_RETURN_IF_ERROR(WriteText(root / "config.echo", report.config_echo));
  if (ctx != nullptr && ctx->config().save_stores) {
    fs::create_directories(root / "stores", ec);
    for (const PopulationInfo& p : report.populations) {
      auto it = ctx->populations().find(p.name);
      if (it == ctx->populations().end()) continue;
      DISTAUDIT_RETURN_IF_ERROR(WriteStore(
          it->second->store,
          (root / "stores" / (SafeName(p.name) + ".mils")).string()));
    }
  }
  return absl::OkStatus();
}

}  // namespace distaudit
