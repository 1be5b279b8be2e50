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

#include "distaudit/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "absl/strings/strip.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

static_assert(std::is_same_v<size_t, uint64_t>);

absl::Status BadValue(const std::string& key, const std::string& value,
                      const char* want) {
  return absl::InvalidArgumentError(absl::StrFormat(
      "config key '%s': '%s' is not %s", key, value, want));
}

absl::Status ParseValue(const std::string& key, const std::string& v,
                        uint64_t& out) {
  if (!absl::SimpleAtoi(v, &out)) return BadValue(key, v, "an unsigned integer");
  return absl::OkStatus();
}
absl::Status ParseValue(const std::string& key, const std::string& v,
                        double& out) {
  if (!absl::SimpleAtod(v, &out) || !std::isfinite(out)) {
    return BadValue(key, v, "a finite number");
  }
  return absl::OkStatus();
}
absl::Status ParseValue(const std::string& key, const std::string& v,
                        bool& out) {
  if (!absl::SimpleAtob(v, &out)) return BadValue(key, v, "a boolean");
  return absl::OkStatus();
}
absl::Status ParseValue(const std::string&, const std::string& v,
                        std::string& out) {
  out = v;
  return absl::OkStatus();
}
template <typename T>
absl::Status ParseValue(const std::string& key, const std::string& v,
                        std::vector<T>& out) {
  std::vector<T> parsed;
  for (absl::string_view part : absl::StrSplit(v, ',', absl::SkipEmpty())) {
    T x;
    DISTAUDIT_RETURN_IF_ERROR(ParseValue(
        key, std::string(absl::StripAsciiWhitespace(part)), x));
    parsed.push_back(x);
  }
  if (parsed.empty()) return BadValue(key, v, "a non-empty list");
  out = std::move(parsed);
  return absl::OkStatus();
}

std::string Format(uint64_t v) { return absl::StrCat(v); }
std::string Format(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string Format(bool v) { return v ? "true" : "false"; }
std::string Format(const std::string& v) { return v; }
template <typename T>
std::string Format(const std::vector<T>& v) {
  std::vector<std::string> parts;
  for (const T& x : v) parts.push_back(Format(x));
  return absl::StrJoin(parts, ",");
}

struct Field {
  const char* name;
  const char* help;
  std::function<absl::Status(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field MakeField(const char* name, const char* help,
                T ExperimentConfig::*member) {
  return Field{
      name, help,
      [name, member](ExperimentConfig& c, const std::string& v) {
        return ParseValue(name, v, c.*member);
      },
      [member](const ExperimentConfig& c) { return Format(c.*member); }};
}

const std::vector<Field>& Fields() {
  using C = ExperimentConfig;
  static const auto* fields = new std::vector<Field>{
      MakeField("data_csv", "tabular CSV to load; empty = synthetic",
                &C::data_csv),
      MakeField("classes", "number of classes", &C::classes),
      MakeField("dims", "synthetic feature dimension", &C::dims),
      MakeField("per_class", "synthetic examples per class", &C::per_class),
      MakeField("spread", "synthetic within-class noise scale", &C::spread),
      MakeField("data_seed", "synthetic data seed", &C::data_seed),
      MakeField("split_seed", "pool split seed", &C::split_seed),
      MakeField("teacher_pool", "teacher pool size", &C::teacher_pool),
      MakeField("student_pool", "student pool size", &C::student_pool),
      MakeField("surrogate_pool", "surrogate split size (from held-out rows)",
                &C::surrogate_pool),
      MakeField("hidden", "hidden layer width", &C::hidden),
      MakeField("epochs", "training epochs", &C::epochs),
      MakeField("learning_rate", "SGD learning rate", &C::learning_rate),
      MakeField("momentum", "SGD momentum", &C::momentum),
      MakeField("batch_size", "minibatch size", &C::batch_size),
      MakeField("temperature", "distillation temperature H", &C::temperature),
      MakeField("gradient_rescale", "scale the soft loss by 1/H^2",
                &C::gradient_rescale),
      MakeField("alpha", "self-distillation soft-loss weight", &C::alpha),
      MakeField("calibration_models", "shadow models used for calibration",
                &C::calibration_models),
      MakeField("evaluation_models", "shadow models attacked as targets",
                &C::evaluation_models),
      MakeField("k", "student queries kept by mean-gap filtering", &C::k),
      MakeField("variance_floor", "lower bound on fitted variances",
                &C::variance_floor),
      MakeField("global_variance", "pool variances across examples",
                &C::global_variance),
      MakeField("workers", "training threads", &C::workers),
      MakeField("targets", "targets for duplication and poisoning",
                &C::targets),
      MakeField("duplicate_copies", "student copies per duplicated target",
                &C::duplicate_copies),
      MakeField("replicas", "poison replica counts", &C::replicas),
      MakeField("temperatures", "temperature grid", &C::temperatures),
      MakeField("alphas", "self-distillation alpha grid", &C::alphas),
      MakeField("candidate_teachers", "candidate set size (unknown teacher)",
                &C::candidate_teachers),
      MakeField("seed", "master seed", &C::seed),
      MakeField("out", "report root directory", &C::out),
      MakeField("save_stores", "also write logit stores", &C::save_stores),
  };
  return *fields;
}

absl::Status Require(bool ok, const std::string& message) {
  return ok ? absl::OkStatus() : absl::InvalidArgumentError(message);
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  DISTAUDIT_RETURN_IF_ERROR(Require(classes >= 2, "classes must be >= 2"));
  DISTAUDIT_RETURN_IF_ERROR(Require(dims >= 1, "dims must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(Require(per_class >= 1, "per_class must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(Require(spread >= 0, "spread must be >= 0"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(teacher_pool >= 2 && student_pool >= 2,
              "teacher_pool and student_pool must be >= 2"));
  DISTAUDIT_RETURN_IF_ERROR(Require(hidden >= 1, "hidden must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(Require(epochs >= 1, "epochs must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(learning_rate > 0, "learning_rate must be > 0"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)"));
  DISTAUDIT_RETURN_IF_ERROR(Require(batch_size >= 1, "batch_size must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(Require(temperature > 0, "temperature must be > 0"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(alpha >= 0 && alpha <= 1, "alpha must be in [0, 1]"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(calibration_models >= 4 && evaluation_models >= 2,
              "need >= 4 calibration and >= 2 evaluation models"));
  DISTAUDIT_RETURN_IF_ERROR(Require(k >= 1, "k must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(variance_floor >= 0, "variance_floor must be >= 0"));
  DISTAUDIT_RETURN_IF_ERROR(Require(workers >= 1, "workers must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(Require(targets >= 1, "targets must be >= 1"));
  DISTAUDIT_RETURN_IF_ERROR(
      Require(candidate_teachers >= 1, "candidate_teachers must be >= 1"));
  for (double h : temperatures) {
    DISTAUDIT_RETURN_IF_ERROR(Require(h > 0, "temperatures must be > 0"));
  }
  for (double a : alphas) {
    DISTAUDIT_RETURN_IF_ERROR(
        Require(a >= 0 && a <= 1, "alphas must be in [0, 1]"));
  }
  return absl::OkStatus();
}

const std::vector<ConfigKey>& ConfigKeys() {
  static const auto* keys = [] {
    auto* out = new std::vector<ConfigKey>;
    const ExperimentConfig defaults;
    for (const Field& f : Fields()) {
      out->push_back({f.name, f.get(defaults), f.help});
    }
    return out;
  }();
  return *keys;
}

absl::Status SetConfigValue(ExperimentConfig& config, const std::string& key,
                            const std::string& value) {
  for (const Field& f : Fields()) {
    if (key == f.name) return f.set(config, value);
  }
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown config key '%s'", key));
}

absl::StatusOr<std::vector<std::pair<std::string, std::string>>>
ParseConfigText(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != absl::string_view::npos) line = line.substr(0, hash);
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrFormat("config line %d: expected key = value", line_no));
    }
    std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    std::string value(absl::StripAsciiWhitespace(line.substr(eq + 1)));
    if (key.empty()) {
      return absl::InvalidArgumentError(
          absl::StrFormat("config line %d: empty key", line_no));
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

absl::StatusOr<ExperimentConfig> ResolveConfig(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    const char* env_seed) {
  ExperimentConfig config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      return absl::NotFoundError(
          absl::StrFormat("cannot open config '%s'", config_path));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto entries = ParseConfigText(buffer.str());
    if (!entries.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(config_path, ": ", entries.status().message()));
    }
    for (const auto& [key, value] : *entries) {
      absl::Status s = SetConfigValue(config, key, value);
      if (!s.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat(config_path, ": ", s.message()));
      }
    }
  }
  if (env_seed != nullptr && *env_seed != '\0') {
    absl::Status s = SetConfigValue(config, "seed", env_seed);
    if (!s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(kSeedEnvVar, ": ", s.message()));
    }
  }
  for (const auto& [key, value] : overrides) {
    DISTAUDIT_RETURN_IF_ERROR(SetConfigValue(config, key, value));
  }
  DISTAUDIT_RETURN_IF_ERROR(config.Validate());
  return config;
}

std::string ConfigEcho(const ExperimentConfig& config) {
  std::string out;
  for (const Field& f : Fields()) {
    absl::StrAppend(&out, f.name, " = ", f.get(config), "\n");
  }
  return out;
}

}  // namespace distaudit
