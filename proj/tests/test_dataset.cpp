#include <gtest/gtest.h>

#include "peergrade/dataset.hpp"
#include "support.hpp"

using namespace peergrade;
using namespace testing_support;

namespace {

ErrorKind kind_of(const DatasetRecords& r) {
  try {
    Dataset::create(r);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a validation error";
  return ErrorKind::Io;
}

}  // namespace

TEST(Dataset, AcceptsTinyDataset) {
  const auto d = Dataset::create(tiny_records());
  EXPECT_EQ(d.grades().size(), 6u);
  EXPECT_EQ(d.submissions_of("e1").size(), 3u);
  EXPECT_EQ(d.exercise_of("s2"), "e1");
  EXPECT_TRUE(d.is_member("a2", "s2"));
  EXPECT_FALSE(d.is_member("g1", "s2"));
}

TEST(Dataset, CanonicalOrderIgnoresInputOrder) {
  auto r = tiny_records();
  auto shuffled = r;
  std::reverse(shuffled.grades.begin(), shuffled.grades.end());
  EXPECT_EQ(Dataset::create(r), Dataset::create(shuffled));
}

TEST(Dataset, DuplicateGradeRejected) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "g1", 0.3);
  EXPECT_EQ(kind_of(r), ErrorKind::DuplicateGrade);
}

TEST(Dataset, SameGraderMayGiveDifferentRoles) {
  // A TA grade and a peer grade by one person are distinct records.
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "g1", 0.3, GradeRole::Ta);
  EXPECT_NO_THROW(Dataset::create(r));
}

TEST(Dataset, SelfGradeByOutsiderRejected) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "g1", 0.3, GradeRole::Self);
  EXPECT_EQ(kind_of(r), ErrorKind::RoleViolation);
}

TEST(Dataset, PeerGradeByMemberRejected) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "a1", 0.3);
  EXPECT_EQ(kind_of(r), ErrorKind::RoleViolation);
}

TEST(Dataset, DanglingSubmissionRejected) {
  auto r = tiny_records();
  add_grade(r, "e1", "s9", "g1", 0.3);
  EXPECT_EQ(kind_of(r), ErrorKind::DanglingId);
}

TEST(Dataset, UnknownExerciseRejected) {
  auto r = tiny_records();
  add_grade(r, "e9", "s1", "g3", 0.3);
  EXPECT_EQ(kind_of(r), ErrorKind::DanglingId);
}

TEST(Dataset, NonPositiveMaximumRejected) {
  auto r = tiny_records();
  r.exercises[0].max_points = 0.0;
  EXPECT_EQ(kind_of(r), ErrorKind::InvalidExercise);
}

TEST(Dataset, OversizedGroupRejected) {
  auto r = tiny_records();
  r.groups["s1"] = {"a1", "b1", "c1", "d1"};
  EXPECT_EQ(kind_of(r), ErrorKind::Validation);
  EXPECT_NO_THROW(Dataset::create(r, {4}));
}

TEST(Dataset, AuthorInTwoGroupsOfOneExerciseRejected) {
  auto r = tiny_records();
  r.groups["s2"] = {"a1", "a2"};
  EXPECT_EQ(kind_of(r), ErrorKind::Validation);
}

TEST(Dataset, BallotRules) {
  auto r = tiny_records();
  r.ballots.push_back({"e1", "g1", {{"s1"}, {"s2", "s3"}}});
  EXPECT_NO_THROW(Dataset::create(r));

  auto twice = r;
  twice.ballots.push_back({"e1", "g1", {{"s2"}, {"s3"}}});
  EXPECT_EQ(kind_of(twice), ErrorKind::Validation);

  auto single = tiny_records();
  single.ballots.push_back({"e1", "g1", {{"s1"}}});
  EXPECT_EQ(kind_of(single), ErrorKind::Validation);

  auto own = tiny_records();
  own.ballots.push_back({"e1", "a1", {{"s1"}, {"s2"}}});
  EXPECT_EQ(kind_of(own), ErrorKind::RoleViolation);
}

TEST(Dataset, NegativeExamRejected) {
  auto r = tiny_records();
  r.exams["g1"] = -1.0;
  EXPECT_EQ(kind_of(r), ErrorKind::Validation);
}

TEST(Dataset, TruthFromTaAveragesRepeatedGrades) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "t1", 0.4, GradeRole::Ta);
  add_grade(r, "e1", "s1", "t2", 0.6, GradeRole::Ta);
  const auto t = truth_from_ta(Dataset::create(r));
  ASSERT_EQ(t.scores.size(), 1u);
  EXPECT_DOUBLE_EQ(*t.find({"e1", "s1"}), 0.5);
  EXPECT_EQ(t.provenance, TruthProvenance::Ta);
}

TEST(Normalize, UnitIntervalDividesByMaximum) {
  auto r = tiny_records();
  r.exercises[0].max_points = 10.0;
  for (auto& g : r.grades) g.value *= 10.0;
  const auto n = normalize_scores(Dataset::create(r), NormalizeMode::UnitInterval);
  EXPECT_DOUBLE_EQ(n.exercise("e1").max_points, 1.0);
  const auto original = Dataset::create(tiny_records());
  for (std::size_t i = 0; i < n.grades().size(); ++i)
    EXPECT_NEAR(n.grades()[i].value, original.grades()[i].value, 1e-12);
  // Idempotent.
  EXPECT_EQ(normalize_scores(n, NormalizeMode::UnitInterval), n);
}

TEST(Normalize, ZScoreHasZeroMeanUnitSampleVariance) {
  const auto n = normalize_scores(Dataset::create(tiny_records()), NormalizeMode::ZScore);
  double sum = 0.0, ss = 0.0;
  for (const auto& g : n.grades()) sum += g.value;
  const double mean = sum / 6.0;
  for (const auto& g : n.grades()) ss += (g.value - mean) * (g.value - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(ss / 5.0, 1.0, 1e-12);
}

TEST(Normalize, ZScoreOnConstantExerciseFails) {
  auto r = tiny_records();
  for (auto& g : r.grades) g.value = 0.5;
  try {
    normalize_scores(Dataset::create(r), NormalizeMode::ZScore);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateExercise);
  }
}

TEST(InduceBallots, OrdersWorstFirstAndTiesEqualValues) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "g3", 0.5);
  add_grade(r, "e1", "s2", "g3", 0.5);
  add_grade(r, "e1", "s3", "g3", 0.1);
  const auto ballots = induce_ballots(Dataset::create(r), {GradeRole::Peer});
  ASSERT_EQ(ballots.size(), 3u);
  EXPECT_EQ(ballots[0].grader, "g1");
  EXPECT_EQ(ballots[0].ranking, (std::vector<TieGroup>{{"s1"}, {"s2"}, {"s3"}}));
  EXPECT_EQ(ballots[1].ranking, (std::vector<TieGroup>{{"s1"}, {"s3"}, {"s2"}}));
  EXPECT_EQ(ballots[2].ranking, (std::vector<TieGroup>{{"s3"}, {"s1", "s2"}}));
}

TEST(InduceBallots, SelfGradesAloneInduceNothing) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "a1", 0.5, GradeRole::Self);
  add_grade(r, "e1", "s2", "a2", 0.5, GradeRole::Self);
  EXPECT_TRUE(induce_ballots(Dataset::create(r), {GradeRole::Self}).empty());
}
