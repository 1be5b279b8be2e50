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

// Command-line front end: data generation, shadow training, attacks and
// the named experiments.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "distaudit/config.h"
#include "distaudit/data.h"
#include "distaudit/experiments.h"
#include "distaudit/lira.h"
#include "distaudit/metrics.h"
#include "distaudit/shadow.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status << "\n";
  return status.code() == absl::StatusCode::kInvalidArgument ||
                 status.code() == absl::StatusCode::kOutOfRange
             ? kExitUsage
             : kExitFailure;
}

std::string ConfigKeysHelp() {
  std::string out = "Config keys (key = value; flags override the file):\n";
  for (const ConfigKey& k : ConfigKeys()) {
    absl::StrAppend(&out, absl::StrFormat("  %-20s %-24s %s\n", k.name,
                                          k.default_value, k.help));
  }
  absl::StrAppend(&out, "Seed precedence: --seed > ", kSeedEnvVar,
                  " > config > ", kDefaultMasterSeed, ".\n");
  return out;
}

// Flags shared by every subcommand that needs a resolved configuration.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string workers;

  void Register(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file");
    app->add_option("--set", sets, "override one config key (key=value)");
    app->add_option("--seed", seed, "master seed (overrides env and config)");
    app->add_option("--workers", workers, "training threads");
    app->footer(ConfigKeysHelp());
  }

  absl::StatusOr<ExperimentConfig> Resolve(
      std::vector<std::pair<std::string, std::string>> extra = {}) const {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& s : sets) {
      const size_t eq = s.find('=');
      if (eq == std::string::npos) {
        return absl::InvalidArgumentError(
            absl::StrFormat("--set expects key=value, got '%s'", s));
      }
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (auto& e : extra) overrides.push_back(std::move(e));
    if (!workers.empty()) overrides.emplace_back("workers", workers);
    if (!seed.empty()) overrides.emplace_back("seed", seed);
    return ResolveConfig(config_path, overrides, std::getenv(kSeedEnvVar));
  }
};

int GenData(size_t classes, size_t dims, size_t per_class, double spread,
            uint64_t seed, const std::string& out) {
  auto data = GenSyntheticMixture(classes, dims, per_class, spread, seed);
  if (!data.ok()) return Fail(data.status());
  absl::Status s = WriteCsvTabular(*data, out);
  if (!s.ok()) return Fail(s);
  std::cout << "wrote " << data->size() << " rows to " << out << "\n";
  return kExitOk;
}

int Shadows(const CommonFlags& flags, const std::string& family_name,
            size_t models, const std::string& knowledge_name,
            const std::string& out) {
  auto family = ParseFamily(family_name);
  if (!family.ok()) return Fail(family.status());
  auto knowledge = ParseKnowledge(knowledge_name);
  if (!knowledge.ok()) return Fail(knowledge.status());
  auto config = flags.Resolve();
  if (!config.ok()) return Fail(config.status());
  auto ctx = ExperimentContext::Create(*config);
  if (!ctx.ok()) return Fail(ctx.status());
  const auto start = std::chrono::steady_clock::now();
  auto spec = PlanFamilyRuns(**ctx, *family, models, config->seed, *knowledge);
  if (!spec.ok()) return Fail(spec.status());
  auto store = ExecuteRuns(*spec, config->workers);
  if (!store.ok()) return Fail(store.status());
  absl::Status s = WriteStore(*store, out);
  if (!s.ok()) return Fail(s);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  std::cout << absl::StrFormat("trained %d %s models in %.1f s; wrote %s\n",
                               store->num_models, FamilyName(*family), secs,
                               out);
  return kExitOk;
}

// Membership plan of the audited pool, read back from a store's bits.
absl::StatusOr<MembershipPlan> PlanFromStore(const LogitStore& store,
                                             std::span<const uint64_t> pool) {
  if (store.num_probe < pool.size() ||
      !std::equal(pool.begin(), pool.end(), store.probe_ids.begin())) {
    return absl::InvalidArgumentError(
        "store does not start with the audited pool");
  }
  std::vector<uint8_t> bits;
  bits.reserve(store.num_models * pool.size());
  for (size_t m = 0; m < store.num_models; ++m) {
    for (size_t j = 0; j < pool.size(); ++j) {
      bits.push_back(store.IsMember(m, j) ? 1 : 0);
    }
  }
  return MembershipPlan(std::vector<uint64_t>(pool.begin(), pool.end()),
                        store.num_models, std::move(bits),
                        store.metadata.master_seed);
}

absl::StatusOr<AttackReport> Attack(const ExperimentContext& ctx,
                                    const std::string& family,
                                    const std::string& calib_path,
                                    const std::string& target_path,
                                    const std::string& label_mode,
                                    bool no_filter) {
  const ExperimentConfig& cfg = ctx.config();
  AttackReport report;
  report.experiment = "attack-" + family;
  report.config_echo = ConfigEcho(cfg);
  report.master_seed = cfg.seed;
  DISTAUDIT_ASSIGN_OR_RETURN(LogitStore target, ReadStore(target_path));
  report.evaluation_models = target.num_models;
  const Dataset& data = *ctx.dataset();
  std::vector<ScoreRecord> records;
  if (family == "logit-baseline") {
    DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix obs,
                               CorrectClassObservations(target, data));
    records = LogitThresholdBaseline(obs, family);
  } else {
    if (calib_path.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("--calib is required for ", family));
    }
    DISTAUDIT_ASSIGN_OR_RETURN(LogitStore calib, ReadStore(calib_path));
    report.calibration_models = calib.num_models;
    LiraOptions lira;
    lira.variance_floor = cfg.variance_floor;
    lira.global_variance = cfg.global_variance;
    if (family == "student-query") {
      const auto& pool = ctx.split().teacher_ids;
      DISTAUDIT_ASSIGN_OR_RETURN(MembershipPlan calib_plan,
                                 PlanFromStore(calib, pool));
      DISTAUDIT_ASSIGN_OR_RETURN(MembershipPlan target_plan,
                                 PlanFromStore(target, pool));
      const size_t t = pool.size();
      const LogitStore cq = calib.SliceProbes(t, calib.num_probe);
      const LogitStore tq = target.SliceProbes(t, target.num_probe);
      std::vector<int> teacher_labels, query_labels;
      for (uint64_t id : pool) {
        DISTAUDIT_ASSIGN_OR_RETURN(size_t row, data.RowOf(id));
        teacher_labels.push_back(data.label(row));
      }
      for (uint64_t id : cq.probe_ids) {
        DISTAUDIT_ASSIGN_OR_RETURN(size_t row, data.RowOf(id));
        query_labels.push_back(data.label(row));
      }
      StudentQueryOptions options;
      options.k = cfg.k;
      options.filter = !no_filter;
      options.lira = lira;
      if (label_mode == "student") {
        options.label_mode = LabelMode::kStudentLabel;
      } else if (label_mode != "teacher") {
        return absl::InvalidArgumentError(absl::StrFormat(
            "--label-mode must be teacher or student, got '%s'", label_mode));
      }
      DISTAUDIT_ASSIGN_OR_RETURN(
          StudentQueryResult result,
          StudentQueryAttack(cq, calib_plan, teacher_labels, query_labels, tq,
                             &target_plan, options, family));
      records = std::move(result.records);
    } else {
      DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix c,
                                 CorrectClassObservations(calib, data));
      DISTAUDIT_ASSIGN_OR_RETURN(ObservationMatrix t,
                                 CorrectClassObservations(target, data));
      DISTAUDIT_ASSIGN_OR_RETURN(records, DirectLira(c, t, lira, family));
    }
  }
  DISTAUDIT_ASSIGN_OR_RETURN(FamilyResult result, ScoreFamily(family, records));
  report.metrics["auc_" + family] = result.roc.auc;
  report.families.push_back(std::move(result));
  auto acc = PerExampleAccuracy(records);
  if (acc.ok()) {
    for (const ExampleAccuracy& a : *acc) {
      report.per_example.push_back(
          {a.example_id, std::nullopt, a.accuracy, a.n_in, a.n_out});
    }
  }
  return report;
}

int Main(int argc, char** argv) {
  CLI::App app{"distaudit: membership-inference auditing of distillation"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 internal failure, 2 usage error.\n"
      "Run `distaudit <command> --help` for command flags and defaults.");

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  size_t classes = 10, dims = 32, per_class = 400;
  double spread = 0.6;
  uint64_t data_seed = 7;
  std::string data_out;
  gen->add_option("--classes", classes, "number of classes")
      ->capture_default_str();
  gen->add_option("--dims", dims, "feature dimension")->capture_default_str();
  gen->add_option("--per-class", per_class, "examples per class")
      ->capture_default_str();
  gen->add_option("--spread", spread, "within-class noise scale")
      ->capture_default_str();
  gen->add_option("--seed", data_seed, "data seed")->capture_default_str();
  gen->add_option("--out", data_out, "output CSV path")->required();

  CLI::App* shadows = app.add_subcommand(
      "shadows", "train a shadow population and write a MILS logit store");
  CommonFlags shadow_flags;
  shadow_flags.Register(shadows);
  std::string family = "teacher-only";
  size_t models = kDefaultCalibrationModels;
  std::string knowledge = "known";
  std::string store_out;
  shadows
      ->add_option("--family", family,
                   "teacher-only, end-to-end, transfer, student-query, "
                   "private-student or self-distill")
      ->capture_default_str();
  shadows
      ->add_option("--models", models,
                   absl::StrCat("number of shadow models; the student-query "
                                "attack's full-scale profile uses ",
                                kStudentQueryProfileModels))
      ->capture_default_str();
  shadows
      ->add_option("--teacher-knowledge", knowledge,
                   "private-student only: known, candidate-set or surrogate")
      ->capture_default_str();
  shadows->add_option("--out", store_out, "output store path")->required();

  CLI::App* attack =
      app.add_subcommand("attack", "score target models from logit stores");
  CommonFlags attack_flags;
  attack_flags.Register(attack);
  std::string attack_family = "teacher";
  std::string calib_path, target_path, label_mode = "teacher", attack_out;
  bool no_filter = false;
  attack
      ->add_option("--family", attack_family,
                   "logit-baseline, student-query, or a LiRA label such as "
                   "teacher, end-to-end, transfer, private-student")
      ->capture_default_str();
  attack->add_option("--calib", calib_path, "calibration store");
  attack->add_option("--target", target_path, "target store")->required();
  attack
      ->add_option("--label-mode", label_mode,
                   "student-query scoring: teacher or student")
      ->capture_default_str();
  attack->add_flag("--no-filter", no_filter,
                   "student-query: score every query");
  attack->add_option("--out", attack_out, "report directory")->required();

  CLI::App* experiment =
      app.add_subcommand("experiment", "run a named experiment");
  CommonFlags exp_flags;
  exp_flags.Register(experiment);
  std::string exp_name, exp_out;
  experiment
      ->add_option("name", exp_name,
                   absl::StrCat("one of: ",
                                absl::StrJoin(ExperimentNames(), ", ")))
      ->required();
  experiment->add_option(
      "--out", exp_out,
      "report directory (default: <config out>/<name>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    return GenData(classes, dims, per_class, spread, data_seed, data_out);
  }
  if (shadows->parsed()) {
    return Shadows(shadow_flags, family, models, knowledge, store_out);
  }
  if (attack->parsed()) {
    auto config = attack_flags.Resolve();
    if (!config.ok()) return Fail(config.status());
    auto ctx = ExperimentContext::Create(*config);
    if (!ctx.ok()) return Fail(ctx.status());
    auto report = Attack(**ctx, attack_family, calib_path, target_path,
                         label_mode, no_filter);
    if (!report.ok()) return Fail(report.status());
    absl::Status s = WriteReport(*report, attack_out);
    if (!s.ok()) return Fail(s);
    std::cout << absl::StrFormat("%s AUC %.4f; report in %s\n", attack_family,
                                 report->families[0].roc.auc, attack_out);
    return kExitOk;
  }
  if (experiment->parsed()) {
    const auto& names = ExperimentNames();
    if (std::find(names.begin(), names.end(), exp_name) == names.end()) {
      std::cerr << "error: unknown experiment '" << exp_name
                << "'; valid names: " << absl::StrJoin(names, ", ") << "\n";
      return kExitUsage;
    }
    auto config = exp_flags.Resolve();
    if (!config.ok()) return Fail(config.status());
    auto ctx = ExperimentContext::Create(*config);
    if (!ctx.ok()) return Fail(ctx.status());
    auto report = RunExperiment(exp_name, **ctx);
    if (!report.ok()) return Fail(report.status());
    const std::string dir =
        exp_out.empty()
            ? (std::filesystem::path(config->out) / exp_name).string()
            : exp_out;
    absl::Status s = WriteReport(*report, dir, ctx->get());
    if (!s.ok()) return Fail(s);
    for (const auto& [key, value] : report->metrics) {
      std::cout << absl::StrFormat("%-32s %.6g\n", key, value);
    }
    std::cout << absl::StrFormat(
        "%s: %d models used, %d trained, %.1f s; report in %s\n", exp_name,
        report->ModelsUsed(), (*ctx)->models_trained(), report->wall_seconds,
        dir);
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace distaudit

int main(int argc, char** argv) { return distaudit::Main(argc, argv); }
