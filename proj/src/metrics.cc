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

#include "distaudit/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "absl/strings/str_format.h"
#include "boost/math/distributions/binomial.hpp"
#include "boost/math/distributions/fisher_f.hpp"

namespace distaudit {
namespace {

struct LineFit {
  double sse = 0.0;
  double syy = 0.0;
};

absl::StatusOr<LineFit> FitLine(std::span<const double> x,
                                std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) {
    return absl::InvalidArgumentError("regressor has zero variance");
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  LineFit fit;
  fit.syy = syy;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - intercept - slope * x[i];
    fit.sse += r * r;
  }
  return fit;
}

std::vector<double> AverageRanks(std::span<const double> v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

absl::StatusOr<RocCurve> ComputeRoc(std::span<const double> scores,
                                    std::span<const int> members) {
  if (scores.size() != members.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d scores but %d labels", scores.size(), members.size()));
  }
  RocCurve curve;
  curve.num_scores = scores.size();
  for (size_t i = 0; i < scores.size(); ++i) {
    if (members[i] != 0 && members[i] != 1) {
      return absl::InvalidArgumentError(
          absl::StrFormat("score %d has unknown membership", i));
    }
    if (std::isnan(scores[i])) {
      return absl::InvalidArgumentError(
          absl::StrFormat("score %d is NaN", i));
    }
    (members[i] ? curve.positives : curve.negatives) += 1;
  }
  if (curve.positives == 0 || curve.negatives == 0) {
    return absl::InvalidArgumentError(
        "ROC needs both member and non-member scores");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  const double p = static_cast<double>(curve.positives);
  const double n = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Twice the trapezoid area in units of one (positive, negative) pair.
  unsigned __int128 area2 = 0;
  uint64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    uint64_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (members[order[i]] ? dtp : dfp) += 1;
      ++i;
    }
    area2 += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back({fp / n, tp / p, s});
  }
  curve.auc = static_cast<double>(area2) / (2.0 * p * n);
  return curve;
}

absl::StatusOr<RocCurve> ComputeRoc(std::span<const ScoreRecord> records) {
  std::vector<double> scores(records.size());
  std::vector<int> members(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    scores[i] = records[i].score;
    members[i] = records[i].member;
  }
  return ComputeRoc(scores, members);
}

double TprAtFpr(const RocCurve& curve, double max_fpr) {
  double best = 0.0;
  for (const RocPoint& pt : curve.points) {
    if (pt.fpr <= max_fpr) best = std::max(best, pt.tpr);
  }
  return best;
}

absl::StatusOr<std::vector<ExampleAccuracy>> PerExampleAccuracy(
    std::span<const ScoreRecord> records) {
  std::vector<ExampleAccuracy> out;
  std::vector<size_t> correct;
  std::unordered_map<uint64_t, size_t> index;
  for (const ScoreRecord& r : records) {
    if (r.member != 0 && r.member != 1) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "record for example %d has unknown membership", r.example_id));
    }
    auto [it, inserted] = index.try_emplace(r.example_id, out.size());
    if (inserted) {
      out.push_back({.example_id = r.example_id});
      correct.push_back(0);
    }
    ExampleAccuracy& e = out[it->second];
    (r.member ? e.n_in : e.n_out) += 1;
    if ((r.score > 0.0) == (r.member == 1)) ++correct[it->second];
  }
  for (size_t k = 0; k < out.size(); ++k) {
    ExampleAccuracy& e = out[k];
    if (e.n_in == 0 || e.n_out == 0) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "insufficient data: example %d seen %d times IN and %d times OUT",
          e.example_id, e.n_in, e.n_out));
    }
    const double n = static_cast<double>(e.n_in + e.n_out);
    e.accuracy = static_cast<double>(correct[k]) / n;
    e.standard_error = std::sqrt(e.accuracy * (1.0 - e.accuracy) / n);
  }
  return out;
}

absl::StatusOr<double> Spearman(std::span<const double> x,
                                std::span<const double> y) {
  if (x.size() != y.size()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("length mismatch: %d vs %d", x.size(), y.size()));
  }
  if (x.size() < 3) {
    return absl::InvalidArgumentError("Spearman needs at least 3 pairs");
  }
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) {
    return absl::InvalidArgumentError("Spearman undefined for constant input");
  }
  return sxy / std::sqrt(sxx * syy);
}

double FSurvival(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::fisher_f(d1, d2), f));
}

absl::StatusOr<ChowResult> ChowTest(std::span<const double> x1,
                                    std::span<const double> y1,
                                    std::span<const double> x2,
                                    std::span<const double> y2) {
  if (x1.size() != y1.size() || x2.size() != y2.size()) {
    return absl::InvalidArgumentError("x and y lengths differ");
  }
  if (x1.size() < 2 || x2.size() < 2 || x1.size() + x2.size() < 5) {
    return absl::InvalidArgumentError(
        "Chow test needs two points per group and five overall");
  }
  std::vector<double> xp(x1.begin(), x1.end());
  xp.insert(xp.end(), x2.begin(), x2.end());
  std::vector<double> yp(y1.begin(), y1.end());
  yp.insert(yp.end(), y2.begin(), y2.end());
  auto g1 = FitLine(x1, y1);
  if (!g1.ok()) return g1.status();
  auto g2 = FitLine(x2, y2);
  if (!g2.ok()) return g2.status();
  auto pooled = FitLine(xp, yp);
  if (!pooled.ok()) return pooled.status();

  ChowResult res;
  res.df1 = 2;
  res.df2 = xp.size() - 4;
  const double within = g1->sse + g2->sse;
  const double gain = std::max(0.0, pooled->sse - within);
  if (gain <= 1e-12 * pooled->syy) {
    res.f_statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  if (within <= 0.0) {
    res.f_statistic = std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    return res;
  }
  res.f_statistic = (gain / 2.0) / (within / static_cast<double>(res.df2));
  res.p_value = FSurvival(res.f_statistic, 2.0, static_cast<double>(res.df2));
  return res;
}

double SignTestPValue(size_t wins, size_t losses) {
  const size_t n = wins + losses;
  if (wins == 0) return 1.0;
  // P(X >= wins) = 1 - P(X <= wins - 1).
  return boost::math::cdf(
      boost::math::complement(boost::math::binomial(n, 0.5), wins - 1));
}

}  // namespace distaudit
