#include <gtest/gtest.h>

#include "peergrade/metrics.hpp"
#include "peergrade/rng.hpp"

using namespace peergrade;

namespace {

ScoreVector vec(std::initializer_list<double> values) {
  ScoreVector v;
  int i = 0;
  for (double x : values) v["s" + std::to_string(i++)] = x;
  return v;
}

}  // namespace

TEST(L2, HandValues) {
  EXPECT_DOUBLE_EQ(l2_error(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
  // sqrt((1 + 4 + 0) / 3)
  EXPECT_DOUBLE_EQ(l2_error(vec({1, 2, 3}), vec({0, 0, 3})), std::sqrt(5.0 / 3.0));
}

TEST(L2, KeyMismatch) {
  ScoreVector a{{"x", 1.0}}, b{{"y", 1.0}};
  try {
    l2_error(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::KeyMismatch);
  }
}

TEST(Kendall, HandValues) {
  EXPECT_DOUBLE_EQ(kendall_tau_error(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(kendall_tau_error(vec({3, 2, 1}), vec({1, 2, 3})), 1.0);
  // One inverted pair out of three.
  EXPECT_DOUBLE_EQ(kendall_tau_error(vec({2, 1, 3}), vec({1, 2, 3})), 1.0 / 3.0);
  // Estimate ties a pair the truth orders: half a disagreement.
  EXPECT_DOUBLE_EQ(kendall_tau_error(vec({1, 1}), vec({1, 2})), 0.5);
  // Tied on both sides counts as agreement.
  EXPECT_DOUBLE_EQ(kendall_tau_error(vec({5, 5}), vec({1, 1})), 0.0);
}

TEST(Kendall, NeedsTwoEntries) {
  try {
    kendall_tau_error(vec({1}), vec({1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(Pearson, HandValuesAndDegenerate) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{4, 3, 2, 1}, c{1, 1, 1, 1};
  EXPECT_NEAR(pearson_r(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pearson_r(x, z), -1.0, 1e-15);
  try {
    pearson_r(x, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UndefinedCorrelation);
  }
}

TEST(Pearson, MatchesTextbookFormula) {
  // r = (n sum xy - sum x sum y) / sqrt((n sum x^2 - (sum x)^2)(n sum y^2 - (sum y)^2))
  const std::vector<double> x{1.5, 2.0, 3.5, 4.0, 7.0}, y{0.3, 0.1, 0.9, 0.7, 0.8};
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxy += x[i] * y[i], sxx += x[i] * x[i], syy += y[i] * y[i];
  }
  const double n = 5.0;
  const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  EXPECT_NEAR(pearson_r(x, y), r, 1e-12);
}

TEST(PerExercise, SplitsAndWarnsOnSingletons) {
  std::map<SubmissionKey, double> fit{{{"a", "s1"}, 0.1}, {{"a", "s2"}, 0.9}, {{"b", "s3"}, 0.5}};
  TruthSet truth;
  truth.scores = {{{"a", "s1"}, 0.2}, {{"a", "s2"}, 0.8}, {{"b", "s3"}, 0.5}};
  const auto l2 = per_exercise_errors(fit, truth, Metric::L2);
  EXPECT_NEAR(l2.errors.at("a"), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(l2.errors.at("b"), 0.0);
  const auto kt = per_exercise_errors(fit, truth, Metric::Kendall);
  EXPECT_EQ(kt.errors.size(), 1u);
  EXPECT_EQ(kt.warnings.size(), 1u);

  fit[{"c", "s9"}] = 1.0;
  try {
    per_exercise_errors(fit, truth, Metric::L2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingTruth);
  }
}
