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
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "distaudit/nn.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "test_util.h"

namespace distaudit {
namespace {

using ::distaudit::oracles::TempPath;
using ::distaudit::testing::Gen;
using ::distaudit::testing::StatusIs;
using ::distaudit::testing::Vec;
using ::testing::ElementsAre;
using ::testing::HasSubstr;
using ::testing::IsEmpty;
using ::testing::UnorderedElementsAreArray;

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

Dataset Tiny(std::vector<double> features, std::vector<int> labels,
             size_t dim = 2, size_t classes = 3) {
  std::vector<uint64_t> ids(labels.size());
  std::iota(ids.begin(), ids.end(), uint64_t{0});
  return *Dataset::Create(dim, classes, std::move(features), std::move(labels),
                          std::move(ids));
}

TEST(DatasetTest, CreateValidates) {
  EXPECT_THAT(Dataset::Create(1, 2, {0.0}, {2}, {0}),
              StatusIs(absl::StatusCode::kOutOfRange));
  EXPECT_THAT(Dataset::Create(1, 2, {std::nan("")}, {0}, {0}),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(Dataset::Create(1, 2, {0.0, 1.0}, {0, 1}, {5, 5}),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(SyntheticMixtureTest, Deterministic) {
  ASSERT_OK_AND_ASSIGN(Dataset a, GenSyntheticMixture(10, 32, 400, 0.6, 7));
  ASSERT_OK_AND_ASSIGN(Dataset b, GenSyntheticMixture(10, 32, 400, 0.6, 7));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 4000u);
  ASSERT_OK_AND_ASSIGN(Dataset c, GenSyntheticMixture(10, 32, 400, 0.6, 8));
  EXPECT_FALSE(a == c);
}

TEST(SyntheticMixtureTest, ZeroSpreadCollapsesToUnitCenters) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(3, 5, 10, 0.0, 1));
  for (int cls = 0; cls < 3; ++cls) {
    std::vector<double> center;
    for (size_t i = 0; i < d.size(); ++i) {
      if (d.label(i) != cls) continue;
      const auto row = d.row(i);
      if (center.empty()) {
        center.assign(row.begin(), row.end());
        double norm = 0.0;
        for (double v : center) norm += v * v;
        EXPECT_NEAR(norm, 1.0, 1e-12);
      }
      EXPECT_TRUE(std::equal(row.begin(), row.end(), center.begin()));
    }
  }
}

TEST(SyntheticMixtureTest, RejectsBadCounts) {
  EXPECT_THAT(GenSyntheticMixture(1, 4, 10, 0.5, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(GenSyntheticMixture(3, 0, 10, 0.5, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(SyntheticMixtureTest, LearnableAboveChance) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(10, 32, 100, 0.6, 7));
  ASSERT_OK_AND_ASSIGN(SplitSpec s, SplitTeacherStudent(d, 500, 500, 1, false));
  ASSERT_OK_AND_ASSIGN(Subset train, d.Gather(s.teacher_ids));
  ASSERT_OK_AND_ASSIGN(Subset test, d.Gather(s.student_ids));
  ASSERT_OK_AND_ASSIGN(ModelParams m, InitModel(32, 16, 10, 3));
  TrainingData td;
  td.features = train.features;
  td.num_examples = train.size();
  td.hard_labels = train.labels;
  TrainConfig cfg;
  cfg.batch_size = 16;
  ASSERT_OK_AND_ASSIGN(m, SgdTrain(m, td, cfg));
  EXPECT_GT(Accuracy(m, test.features, test.labels), 0.1);
}

TEST(CsvTest, LoadsWellFormedFile) {
  TempPath tmp("csv");
  WriteText(tmp.path(), "1,0.5,2\n0,-1,3e-2\n");
  ASSERT_OK_AND_ASSIGN(Dataset d, LoadCsvTabular(tmp.path(), 2));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 2u);
  EXPECT_THAT(Vec(d.labels()), ElementsAre(1, 0));
  EXPECT_THAT(Vec(d.ids()), ElementsAre(0u, 1u));
  EXPECT_THAT(Vec(d.row(1)), ElementsAre(-1.0, 0.03));
}

TEST(CsvTest, ParseErrorNamesTheRow) {
  TempPath tmp("csv");
  WriteText(tmp.path(), "1,0.5,2\n0,abc,3\n");
  const auto d = LoadCsvTabular(tmp.path(), 2);
  EXPECT_THAT(d, StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_THAT(std::string(d.status().message()), HasSubstr("row 2"));
}

TEST(CsvTest, LabelOutOfRangeIsInvalidData) {
  TempPath tmp("csv");
  WriteText(tmp.path(), "5,0.5,2\n");
  EXPECT_THAT(LoadCsvTabular(tmp.path(), 2),
              StatusIs(absl::StatusCode::kOutOfRange));
}

TEST(CsvTest, MissingFile) {
  EXPECT_THAT(LoadCsvTabular("/nonexistent/x.csv", 2),
              StatusIs(absl::StatusCode::kNotFound));
}

TEST(CsvTest, RoundTripIsExact) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(4, 3, 5, 0.7, 2));
  TempPath tmp("csv");
  ASSERT_OK(WriteCsvTabular(d, tmp.path()));
  ASSERT_OK_AND_ASSIGN(Dataset back, LoadCsvTabular(tmp.path(), 4));
  EXPECT_EQ(back, d);
}

TEST(CsvTest, ShuffledRowsGiveSameMultiset) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(3, 2, 6, 0.5, 4));
  TempPath a("csv"), b("csv");
  ASSERT_OK(WriteCsvTabular(d, a.path()));
  std::ifstream in(a.path());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::mt19937_64 rng(1);
  std::shuffle(lines.begin(), lines.end(), rng);
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  WriteText(b.path(), text);

  auto rows = [](const Dataset& ds) {
    std::multiset<std::pair<int, std::vector<double>>> out;
    for (size_t i = 0; i < ds.size(); ++i) {
      out.emplace(ds.label(i),
                  std::vector<double>(ds.row(i).begin(), ds.row(i).end()));
    }
    return out;
  };
  ASSERT_OK_AND_ASSIGN(Dataset x, LoadCsvTabular(a.path(), 3));
  ASSERT_OK_AND_ASSIGN(Dataset y, LoadCsvTabular(b.path(), 3));
  EXPECT_EQ(rows(x), rows(y));
}

TEST(DedupTest, NoDuplicatesIsIdentity) {
  const Dataset d = Tiny({0, 1, 2, 3}, {0, 1});
  auto [out, removed] = DedupExact(d);
  EXPECT_EQ(out, d);
  EXPECT_THAT(removed, IsEmpty());
}

TEST(DedupTest, TripledRowLosesTwoCopies) {
  const Dataset d = Tiny({1, 1, 0, 0, 1, 1, 1, 1}, {2, 0, 2, 2});
  auto [out, removed] = DedupExact(d);
  EXPECT_THAT(removed, ElementsAre(2u, 3u));
  EXPECT_THAT(Vec(out.ids()), ElementsAre(0u, 1u));
  auto [again, removed_again] = DedupExact(out);
  EXPECT_EQ(again, out);
  EXPECT_THAT(removed_again, IsEmpty());
}

TEST(DedupTest, PropertyResultHasDistinctRows) {
  Gen gen(12);
  for (int t = 0; t < 30; ++t) {
    const size_t n = gen.Size(1, 40);
    std::vector<double> f;
    std::vector<int> y;
    for (size_t i = 0; i < n; ++i) {
      f.push_back(gen.Int(0, 2));
      f.push_back(gen.Int(0, 2));
      y.push_back(gen.Int(0, 2));
    }
    auto [out, removed] = DedupExact(Tiny(f, y));
    std::set<std::vector<double>> rows;
    for (size_t i = 0; i < out.size(); ++i) {
      rows.emplace(out.row(i).begin(), out.row(i).end());
    }
    EXPECT_EQ(rows.size(), out.size());
    EXPECT_EQ(out.size() + removed.size(), n);
  }
}

TEST(SplitTest, DisjointAndExhaustive) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(2, 2, 50, 0.5, 1));
  ASSERT_OK_AND_ASSIGN(SplitSpec s, SplitTeacherStudent(d, 60, 40, 9, false));
  EXPECT_EQ(s.teacher_ids.size(), 60u);
  EXPECT_EQ(s.student_ids.size(), 40u);
  EXPECT_THAT(s.held_out_ids, IsEmpty());
  std::vector<uint64_t> all = s.teacher_ids;
  all.insert(all.end(), s.student_ids.begin(), s.student_ids.end());
  EXPECT_THAT(all, UnorderedElementsAreArray(Vec(d.ids())));
  ASSERT_OK_AND_ASSIGN(SplitSpec again,
                       SplitTeacherStudent(d, 60, 40, 9, false));
  EXPECT_EQ(again, s);
}

TEST(SplitTest, SelfDistillSharesPool) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(2, 2, 50, 0.5, 1));
  ASSERT_OK_AND_ASSIGN(SplitSpec s, SplitTeacherStudent(d, 30, 30, 9, true));
  EXPECT_EQ(s.teacher_ids, s.student_ids);
  EXPECT_EQ(s.held_out_ids.size(), 70u);
  EXPECT_THAT(SplitTeacherStudent(d, 30, 20, 9, true),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(SplitTest, InsufficientData) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(2, 2, 10, 0.5, 1));
  EXPECT_THAT(SplitTeacherStudent(d, 15, 6, 1, false),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(MembershipPlanTest, TwoModelsSplitEveryExample) {
  const std::vector<uint64_t> pool = {4, 5, 6, 7};
  ASSERT_OK_AND_ASSIGN(MembershipPlan p, SampleMembershipPlan(pool, 2, 3));
  for (size_t j = 0; j < pool.size(); ++j) {
    EXPECT_EQ(p.InCount(j), 1u);
    EXPECT_NE(p.IsIn(0, j), p.IsIn(1, j));
  }
  EXPECT_THAT(SampleMembershipPlan(pool, 1, 3),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(MembershipPlanTest, PropertyExactBalanceAndDeterminism) {
  Gen gen(2);
  for (int t = 0; t < 40; ++t) {
    const size_t models = gen.Size(2, 33);
    std::vector<uint64_t> pool(gen.Size(1, 50));
    std::iota(pool.begin(), pool.end(), uint64_t{100});
    const uint64_t seed = gen.rng()();
    ASSERT_OK_AND_ASSIGN(MembershipPlan p,
                         SampleMembershipPlan(pool, models, seed));
    for (size_t j = 0; j < pool.size(); ++j) {
      EXPECT_EQ(p.InCount(j), models / 2);
    }
    size_t total = 0;
    for (size_t m = 0; m < models; ++m) total += p.InIds(m).size();
    EXPECT_EQ(total, pool.size() * (models / 2));
    ASSERT_OK_AND_ASSIGN(MembershipPlan q,
                         SampleMembershipPlan(pool, models, seed));
    EXPECT_EQ(p, q);
  }
}

TEST(MembershipPlanTest, SliceKeepsRows) {
  const std::vector<uint64_t> pool = {1, 2, 3};
  ASSERT_OK_AND_ASSIGN(MembershipPlan p, SampleMembershipPlan(pool, 6, 3));
  const MembershipPlan s = p.SliceModels(2, 5);
  EXPECT_EQ(s.num_models(), 3u);
  for (size_t m = 0; m < 3; ++m) EXPECT_EQ(s.InIds(m), p.InIds(m + 2));
}

TEST(InjectDuplicatesTest, AppendsExactCopies) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(3, 4, 10, 0.5, 1));
  ASSERT_OK_AND_ASSIGN(SplitSpec s, SplitTeacherStudent(d, 10, 10, 2, false));
  const std::vector<uint64_t> targets(s.teacher_ids.begin(),
                                      s.teacher_ids.begin() + 5);
  ASSERT_OK_AND_ASSIGN(DuplicatedSplit dup, InjectDuplicates(s, targets, d));
  EXPECT_EQ(dup.split.student_ids.size(), 15u);
  EXPECT_EQ(dup.split.teacher_ids, s.teacher_ids);
  ASSERT_EQ(dup.copies.size(), 5u);
  for (const auto& [orig, copy] : dup.copies) {
    const size_t a = *dup.dataset.RowOf(orig), b = *dup.dataset.RowOf(copy);
    EXPECT_TRUE(std::ranges::equal(dup.dataset.row(a), dup.dataset.row(b)));
    EXPECT_EQ(dup.dataset.label(a), dup.dataset.label(b));
    EXPECT_FALSE(d.Contains(copy));
  }
}

TEST(InjectDuplicatesTest, EmptyTargetsAndForeignTargets) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(3, 4, 10, 0.5, 1));
  ASSERT_OK_AND_ASSIGN(SplitSpec s, SplitTeacherStudent(d, 10, 10, 2, false));
  ASSERT_OK_AND_ASSIGN(DuplicatedSplit same, InjectDuplicates(s, {}, d));
  EXPECT_EQ(same.split, s);
  EXPECT_EQ(same.dataset, d);
  const std::vector<uint64_t> bad = {s.student_ids[0]};
  EXPECT_THAT(InjectDuplicates(s, bad, d),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(PoisonTest, ZeroReplicasUnchanged) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(3, 4, 10, 0.5, 1));
  ASSERT_OK_AND_ASSIGN(Dataset p, PoisonLabelFlip(d, 3, 0, 1));
  EXPECT_EQ(p, d);
  EXPECT_THAT(PoisonLabelFlip(d, 999, 2, 1),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(PoisonTest, PropertyReplicasShareOneWrongLabel) {
  ASSERT_OK_AND_ASSIGN(Dataset d, GenSyntheticMixture(5, 3, 8, 0.5, 1));
  Gen gen(6);
  std::set<int> seen_wrong;
  for (int t = 0; t < 60; ++t) {
    const uint64_t target = gen.Size(0, d.size() - 1);
    const size_t r = gen.Size(1, 6);
    ASSERT_OK_AND_ASSIGN(Dataset p, PoisonLabelFlip(d, target, r, gen.rng()()));
    ASSERT_EQ(p.size(), d.size() + r);
    const int truth = d.label(*d.RowOf(target));
    const int wrong = p.label(d.size());
    EXPECT_NE(wrong, truth);
    seen_wrong.insert(wrong);
    for (size_t k = d.size(); k < p.size(); ++k) {
      EXPECT_EQ(p.label(k), wrong);
      EXPECT_TRUE(std::ranges::equal(p.row(k), d.row(*d.RowOf(target))));
    }
  }
  EXPECT_EQ(seen_wrong.size(), 5u);
}

}  // namespace
}  // namespace distaudit
