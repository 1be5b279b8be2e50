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

#include "distaudit/lira.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/strings/str_format.h"
#include "distaudit/status_macros.h"

namespace distaudit {
namespace {

// Mean and population variance by two passes.
void MeanVariance(std::span<const double> xs, double& mean, double& var) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  var = ss / static_cast<double>(xs.size());
}

// Column means and population variances over the listed rows of a
// rows x cols matrix.
void ColumnMoments(std::span<const double> matrix, size_t cols,
                   std::span<const size_t> rows, std::vector<double>& mean,
                   std::vector<double>& var) {
  mean.assign(cols, 0.0);
  var.assign(cols, 0.0);
  for (size_t r : rows) {
    const double* v = matrix.data() + r * cols;
    for (size_t i = 0; i < cols; ++i) mean[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& m : mean) m *= inv;
  for (size_t r : rows) {
    const double* v = matrix.data() + r * cols;
    for (size_t i = 0; i < cols; ++i) {
      const double d = v[i] - mean[i];
      var[i] += d * d;
    }
  }
  for (double& s : var) s *= inv;
}

// Per-class copies of a store's logits as model x probe double matrices.
std::vector<std::vector<double>> ClassPlanes(const LogitStore& store) {
  const size_t q = store.num_probe;
  std::vector<std::vector<double>> planes(
      store.num_classes, std::vector<double>(store.num_models * q));
  for (size_t m = 0; m < store.num_models; ++m) {
    for (size_t i = 0; i < q; ++i) {
      for (size_t c = 0; c < store.num_classes; ++c) {
        planes[c][m * q + i] = store.Logit(m, i, c);
      }
    }
  }
  return planes;
}

// model x probe matrix of each probe's own-label logit.
std::vector<double> LabelPlane(const LogitStore& store,
                               std::span<const int> labels) {
  const size_t q = store.num_probe;
  std::vector<double> plane(store.num_models * q);
  for (size_t m = 0; m < store.num_models; ++m) {
    for (size_t i = 0; i < q; ++i) {
      plane[m * q + i] = store.Logit(m, i, static_cast<size_t>(labels[i]));
    }
  }
  return plane;
}

}  // namespace

double GaussianPair::sigma_in() const { return std::sqrt(var_in); }
double GaussianPair::sigma_out() const { return std::sqrt(var_out); }
double GaussianPair::MeanGap() const { return std::abs(mu_in - mu_out); }

absl::StatusOr<GaussianPair> FitGaussianPair(
    std::span<const double> in_samples, std::span<const double> out_samples,
    double variance_floor) {
  if (in_samples.size() < 2 || out_samples.size() < 2) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "insufficient data: need >= 2 IN and >= 2 OUT samples, got %d / %d",
        in_samples.size(), out_samples.size()));
  }
  GaussianPair g;
  g.n_in = in_samples.size();
  g.n_out = out_samples.size();
  MeanVariance(in_samples, g.mu_in, g.var_in);
  MeanVariance(out_samples, g.mu_out, g.var_out);
  g.var_in = std::max(g.var_in, variance_floor);
  g.var_out = std::max(g.var_out, variance_floor);
  return g;
}

double LogLr(const GaussianPair& g, double obs) {
  const double din = obs - g.mu_in;
  const double dout = obs - g.mu_out;
  return 0.5 * (std::log(g.var_out) - std::log(g.var_in)) -
         din * din / (2.0 * g.var_in) + dout * dout / (2.0 * g.var_out);
}

absl::StatusOr<ObservationMatrix> CorrectClassObservations(
    const LogitStore& store, const Dataset& dataset) {
  if (store.num_classes != dataset.classes()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "store has %d classes, dataset %d", store.num_classes,
        dataset.classes()));
  }
  std::vector<int> labels(store.num_probe);
  for (size_t p = 0; p < store.num_probe; ++p) {
    DISTAUDIT_ASSIGN_OR_RETURN(size_t row, dataset.RowOf(store.probe_ids[p]));
    labels[p] = dataset.label(row);
  }
  ObservationMatrix obs;
  obs.num_models = store.num_models;
  obs.num_examples = store.num_probe;
  obs.example_ids = store.probe_ids;
  obs.values = LabelPlane(store, labels);
  obs.member = store.membership;
  return obs;
}

absl::StatusOr<std::vector<ScoreRecord>> DirectLira(
    const ObservationMatrix& calibration, const ObservationMatrix& targets,
    const LiraOptions& options, const std::string& family) {
  if (calibration.example_ids != targets.example_ids) {
    return absl::InvalidArgumentError(
        "calibration and target observations cover different examples");
  }
  const size_t n = calibration.num_examples;
  std::vector<GaussianPair> pairs(n);
  std::vector<double> in, out;
  for (size_t j = 0; j < n; ++j) {
    in.clear();
    out.clear();
    for (size_t m = 0; m < calibration.num_models; ++m) {
      (calibration.is_member(m, j) ? in : out).push_back(calibration.at(m, j));
    }
    auto fit = FitGaussianPair(in, out, 0.0);
    if (!fit.ok()) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "insufficient data for example %d: %d IN / %d OUT calibration "
          "models",
          calibration.example_ids[j], in.size(), out.size()));
    }
    pairs[j] = *fit;
  }
  if (options.global_variance) {
    double vin = 0.0, vout = 0.0;
    for (const auto& g : pairs) {
      vin += g.var_in;
      vout += g.var_out;
    }
    for (auto& g : pairs) {
      g.var_in = vin / static_cast<double>(n);
      g.var_out = vout / static_cast<double>(n);
    }
  }
  for (auto& g : pairs) {
    g.var_in = std::max(g.var_in, options.variance_floor);
    g.var_out = std::max(g.var_out, options.variance_floor);
  }

  std::vector<ScoreRecord> records;
  records.reserve(targets.num_models * n);
  for (size_t m = 0; m < targets.num_models; ++m) {
    for (size_t j = 0; j < n; ++j) {
      ScoreRecord r;
      r.example_id = targets.example_ids[j];
      r.model = m;
      r.score = LogLr(pairs[j], targets.at(m, j));
      r.member = targets.member.empty() ? -1 : targets.is_member(m, j);
      r.family = family;
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<size_t> MeanGapFilter(std::span<const GaussianPair> pairs,
                                  size_t k) {
  std::vector<size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  const size_t keep = std::min(k, pairs.size());
  std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(),
                    [&](size_t a, size_t b) {
                      const double ga = pairs[a].MeanGap();
                      const double gb = pairs[b].MeanGap();
                      if (ga != gb) return ga > gb;
                      return a < b;
                    });
  idx.resize(keep);
  return idx;
}

absl::StatusOr<StudentQueryResult> StudentQueryAttack(
    const LogitStore& calibration, const MembershipPlan& calibration_plan,
    std::span<const int> teacher_labels, std::span<const int> query_labels,
    const LogitStore& targets, const MembershipPlan* target_plan,
    const StudentQueryOptions& options, const std::string& family) {
  if (options.k == 0) {
    return absl::InvalidArgumentError("student-query attack needs k >= 1");
  }
  const size_t q = calibration.num_probe;
  const size_t pool = calibration_plan.pool_size();
  if (targets.probe_ids != calibration.probe_ids ||
      targets.num_classes != calibration.num_classes) {
    return absl::InvalidArgumentError(
        "target and calibration stores were probed on different queries");
  }
  if (query_labels.size() != q) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d query labels for %d queries", query_labels.size(), q));
  }
  if (calibration_plan.num_models() != calibration.num_models) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "calibration plan has %d models, store %d",
        calibration_plan.num_models(), calibration.num_models));
  }
  if (teacher_labels.size() != pool) {
    return absl::InvalidArgumentError("one teacher label per pool example");
  }
  if (target_plan != nullptr &&
      (target_plan->num_models() != targets.num_models ||
       !std::ranges::equal(target_plan->pool_ids(),
                           calibration_plan.pool_ids()))) {
    return absl::InvalidArgumentError(
        "target plan does not match the targets or the calibration pool");
  }
  for (int y : teacher_labels) {
    if (y < 0 || static_cast<size_t>(y) >= calibration.num_classes) {
      return absl::InvalidArgumentError("teacher label out of range");
    }
  }
  for (int y : query_labels) {
    if (y < 0 || static_cast<size_t>(y) >= calibration.num_classes) {
      return absl::InvalidArgumentError("query label out of range");
    }
  }

  const bool by_teacher = options.label_mode == LabelMode::kTeacherLabel;
  std::vector<std::vector<double>> calib_planes, target_planes;
  std::vector<double> calib_label, target_label;
  if (by_teacher) {
    calib_planes = ClassPlanes(calibration);
    target_planes = ClassPlanes(targets);
  } else {
    calib_label = LabelPlane(calibration, query_labels);
    target_label = LabelPlane(targets, query_labels);
  }

  StudentQueryResult result;
  result.records.resize(targets.num_models * pool);
  result.selected.resize(pool);
  std::vector<size_t> in_models, out_models;
  std::vector<double> mean_in, var_in, mean_out, var_out;
  std::vector<GaussianPair> pairs(q);
  for (size_t j = 0; j < pool; ++j) {
    in_models.clear();
    out_models.clear();
    for (size_t m = 0; m < calibration.num_models; ++m) {
      (calibration_plan.IsIn(m, j) ? in_models : out_models).push_back(m);
    }
    if (in_models.size() < 2 || out_models.size() < 2) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "insufficient data for teacher example %d: %d IN / %d OUT "
          "calibration models",
          calibration_plan.pool_ids()[j], in_models.size(),
          out_models.size()));
    }
    const size_t c = static_cast<size_t>(teacher_labels[j]);
    std::span<const double> calib =
        by_teacher ? std::span<const double>(calib_planes[c]) : calib_label;
    std::span<const double> target =
        by_teacher ? std::span<const double>(target_planes[c]) : target_label;

    ColumnMoments(calib, q, in_models, mean_in, var_in);
    ColumnMoments(calib, q, out_models, mean_out, var_out);
    if (options.lira.global_variance) {
      const double vin =
          std::accumulate(var_in.begin(), var_in.end(), 0.0) / q;
      const double vout =
          std::accumulate(var_out.begin(), var_out.end(), 0.0) / q;
      std::fill(var_in.begin(), var_in.end(), vin);
      std::fill(var_out.begin(), var_out.end(), vout);
    }
    for (size_t i = 0; i < q; ++i) {
      GaussianPair& g = pairs[i];
      g.mu_in = mean_in[i];
      g.mu_out = mean_out[i];
      g.var_in = std::max(var_in[i], options.lira.variance_floor);
      g.var_out = std::max(var_out[i], options.lira.variance_floor);
      g.n_in = in_models.size();
      g.n_out = out_models.size();
    }
    std::vector<size_t>& selected = result.selected[j];
    if (options.filter) {
      selected = MeanGapFilter(pairs, options.k);
    } else {
      selected.resize(q);
      std::iota(selected.begin(), selected.end(), size_t{0});
    }
    for (size_t t = 0; t < targets.num_models; ++t) {
      const double* row = target.data() + t * q;
      double score = 0.0;
      for (size_t i : selected) score += LogLr(pairs[i], row[i]);
      ScoreRecord& r = result.records[t * pool + j];
      r.example_id = calibration_plan.pool_ids()[j];
      r.model = t;
      r.score = score;
      r.member = target_plan ? target_plan->IsIn(t, j) : -1;
      r.family = family;
    }
  }
  return result;
}

absl::StatusOr<StudentQueryResult> StudentQueryAttack(
    const LogitStore& calibration, const MembershipPlan& calibration_plan,
    std::span<const int> teacher_labels, const QueryDataset& target,
    const StudentQueryOptions& options) {
  if (target.ids != calibration.probe_ids) {
    return absl::InvalidArgumentError(
        "query dataset does not match the calibration queries");
  }
  LogitStore one;
  one.family = ShadowFamily::kStudentQuery;
  one.num_models = 1;
  one.num_probe = target.size();
  one.num_classes = target.classes;
  one.probe_ids = target.ids;
  one.membership.assign(target.size(), 0);
  one.logits.assign(target.raw_logits.begin(), target.raw_logits.end());
  return StudentQueryAttack(calibration, calibration_plan, teacher_labels,
                            target.hard_labels, one, nullptr, options,
                            "student-query");
}

std::vector<ScoreRecord> LogitThresholdBaseline(
    const ObservationMatrix& targets, const std::string& family) {
  std::vector<ScoreRecord> records;
  records.reserve(targets.num_models * targets.num_examples);
  for (size_t m = 0; m < targets.num_models; ++m) {
    for (size_t j = 0; j < targets.num_examples; ++j) {
      ScoreRecord r;
      r.example_id = targets.example_ids[j];
      r.model = m;
      r.score = targets.at(m, j);
      r.member = targets.member.empty() ? -1 : targets.is_member(m, j);
      r.family = family;
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<double> LogitsFromProbabilities(std::span<const double> probs) {
  std::vector<double> out(probs.size());
  double mean = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    out[i] = std::log(probs[i]);
    mean += out[i];
  }
  mean /= static_cast<double>(probs.size());
  for (double& v : out) v -= mean;
  return out;
}

}  // namespace distaudit
