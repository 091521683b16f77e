#include <gtest/gtest.h>

#include "peergrade/supervised.hpp"
#include "peergrade/synth.hpp"
#include "support.hpp"

using namespace peergrade;
using namespace testing_support;

namespace {

TruthSet tiny_truth() {
  TruthSet t;
  t.scores = {{{"e1", "s1"}, 0.3}, {{"e1", "s2"}, 0.6}, {{"e1", "s3"}, 0.8}};
  return t;
}

}  // namespace

TEST(Split, StratifiedDeterministicAndDisjoint) {
  std::set<SubmissionKey> keys;
  for (int i = 0; i < 7; ++i) keys.insert({"a", "s" + std::to_string(i)});
  for (int i = 0; i < 4; ++i) keys.insert({"b", "t" + std::to_string(i)});
  const auto s = make_split(keys, 0.5, 3);
  std::size_t train_a = 0;
  for (const auto& k : s.train) train_a += k.exercise == "a";
  EXPECT_EQ(train_a, 4u);  // round(3.5)
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.train.size() + s.test.size(), keys.size());
  for (const auto& k : s.train) EXPECT_FALSE(s.test.count(k));
  EXPECT_EQ(make_split(keys, 0.5, 3).train, s.train);
  EXPECT_THROW(make_split(keys, 1.0, 3), Error);
}

TEST(Sn, HandComputedBiasCorrection) {
  const auto d = Dataset::create(tiny_records());
  TrainTestSplit split;
  split.train = {{"e1", "s1"}, {"e1", "s2"}};
  split.test = {{"e1", "s3"}};
  const auto biases = estimate_grader_bias(d, tiny_truth(), split.train);
  // g1: (0.2-0.3 + 0.5-0.6)/2 = -0.1; g2: (0.4-0.3 + 0.9-0.6)/2 = 0.2
  EXPECT_NEAR(biases.at("g1").bias, -0.1, 1e-12);
  EXPECT_NEAR(biases.at("g2").bias, 0.2, 1e-12);
  const auto fit = sn_estimate(d, tiny_truth(), split);
  ASSERT_EQ(fit.scores.size(), 1u);
  EXPECT_NEAR(fit.scores.at({"e1", "s3"}), ((0.7 + 0.1) + (0.8 - 0.2)) / 2.0, 1e-12);
}

TEST(Sn, UnsupportedGraderDefaultsToZeroBias) {
  auto r = tiny_records();
  add_grade(r, "e1", "s3", "g9", 0.5);
  const auto d = Dataset::create(r);
  const auto biases = estimate_grader_bias(d, tiny_truth(), {{"e1", "s1"}});
  EXPECT_EQ(biases.at("g9").support, 0u);
  EXPECT_DOUBLE_EQ(biases.at("g9").bias, 0.0);
}

TEST(Sn, PerExerciseKeys) {
  const auto d = Dataset::create(tiny_records());
  const auto biases = estimate_grader_bias(d, tiny_truth(), {{"e1", "s1"}}, {GradeRole::Peer}, true);
  EXPECT_TRUE(biases.count("g1@e1"));
}

TEST(Smt, AnchoredScoresStayNearTruth) {
  auto c = fig1_left_config(4, 12);
  c.n_submissions = 20;
  c.n_graders = 20;
  c.n_exercises = 2;
  const auto data = generate(c);
  const auto split = make_split(data.truth, 0.5, 1);
  EmConfig em;
  em.tolerance = 1e-13;
  em.max_iterations = 100000;
  const auto fit = smt_fit(data.dataset, data.truth, split.train, {}, 1000.0, em);
  EXPECT_FALSE(fit.bias.count(ta_pseudo_grader()));
  EXPECT_FALSE(fit.reliability.count(ta_pseudo_grader()));

  // At the optimum each anchored score is the precision-weighted average of
  // its prior mean, the truth at reliability 1000, and the bias-corrected grades.
  std::map<ExerciseId, std::vector<double>> values;
  for (const auto& g : data.dataset.grades()) values[g.exercise].push_back(g.value);
  std::map<ExerciseId, std::pair<double, double>> prior;
  for (const auto& [e, v] : values) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    prior[e] = {m, ss / static_cast<double>(v.size() - 1)};
  }
  std::map<SubmissionKey, std::pair<double, double>> acc;
  for (const auto& g : data.dataset.grades()) {
    const double r = fit.reliability.at(g.grader);
    acc[{g.exercise, g.submission}].first += r * (g.value - fit.bias.at(g.grader));
    acc[{g.exercise, g.submission}].second += r;
  }
  double umt_err = 0.0, smt_err = 0.0;
  const auto umt = umt_fit(data.dataset);
  for (const auto& k : split.train) {
    const auto [mu, v] = prior.at(k.exercise);
    const double t = data.truth.scores.at(k);
    const double want = (mu / v + 1000.0 * t + acc[k].first) / (1.0 / v + 1000.0 + acc[k].second);
    EXPECT_NEAR(fit.scores.at(k), want, 1e-8);
    smt_err += std::abs(fit.scores.at(k) - t);
    umt_err += std::abs(umt.scores.at(k) - t);
  }
  EXPECT_LT(smt_err, 0.5 * umt_err);
  // With nothing anchored SMT is UMT.
  EXPECT_EQ(smt_fit(data.dataset, data.truth, {}).scores, umt_fit(data.dataset).scores);
}

TEST(Smt, AnchorWithoutTruthFails) {
  const auto d = Dataset::create(tiny_records());
  try {
    smt_fit(d, TruthSet{}, {{"e1", "s1"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingTruth);
  }
}

TEST(Diagnostics, HandComputed) {
  const auto report = grader_diagnostics(Dataset::create(tiny_records()));
  // g1 deviations from g2: -0.2, -0.4, -0.1.
  const auto& g1 = report.graders.at("g1");
  EXPECT_EQ(g1.support, 3u);
  EXPECT_NEAR(g1.mean_given_grade, 1.4 / 3.0, 1e-12);
  EXPECT_NEAR(g1.peer_relative_bias, -0.7 / 3.0, 1e-12);
  const double m = -0.7 / 3.0;
  const double var = ((-0.2 - m) * (-0.2 - m) + (-0.4 - m) * (-0.4 - m) + (-0.1 - m) * (-0.1 - m)) / 2.0;
  EXPECT_NEAR(g1.peer_relative_variance, var, 1e-12);
  EXPECT_NEAR(report.graders.at("g2").peer_relative_bias, 0.7 / 3.0, 1e-12);
}

TEST(Diagnostics, LowSupportGraderSkipped) {
  auto r = tiny_records();
  add_grade(r, "e1", "s1", "g3", 0.5);
  const auto report = grader_diagnostics(Dataset::create(r));
  EXPECT_TRUE(report.skipped.count("g3"));
  EXPECT_FALSE(report.graders.count("g3"));
}

TEST(MeanDeviation, HandComputed) {
  const auto d = Dataset::create(tiny_records());
  const auto dev = mean_deviation(d, tiny_truth());
  // g1 residuals -0.1, -0.1, -0.1 -> bias -0.1, deviation 0.
  EXPECT_NEAR(dev.at("g1"), 0.0, 1e-12);
  // g2 residuals 0.1, 0.3, 0.0 -> bias 0.1333, |dev| = 0.0333, 0.1667, 0.1333.
  EXPECT_NEAR(dev.at("g2"), (1.0 / 30 + 1.0 / 6 + 2.0 / 15) / 3.0, 1e-12);
}

TEST(Correlations, ExamCorrelationsOmittedWithoutExams) {
  const auto data = generate(ad_shaped_config(2));
  const auto truth = truth_from_ta(data.dataset);
  const auto report = correlation_report(data.dataset, truth);
  EXPECT_TRUE(report.r_homework_bias.has_value());
  EXPECT_FALSE(report.r_exam_bias.has_value());
  EXPECT_FALSE(report.notes.empty());
  EXPECT_GE(*report.r_homework_bias, -1.0);
  EXPECT_LE(*report.r_homework_bias, 1.0);
}

TEST(Correlations, HomeworkPerformanceIsGroupMeanTruth) {
  auto r = tiny_records();
  add_submission(r, "e2", "t1", {"a1"});
  r.exercises.push_back({"e2", 1.0});
  add_grade(r, "e2", "t1", "g1", 0.4);
  auto truth = tiny_truth();
  truth.scores[{"e2", "t1"}] = 0.5;
  const auto hw = homework_performance(Dataset::create(r), truth);
  EXPECT_NEAR(hw.at("a1"), 0.4, 1e-12);
  EXPECT_NEAR(hw.at("a2"), 0.6, 1e-12);
}

TEST(Exam, DirectModeMapsExamsOntoReliabilities) {
  auto r = tiny_records();
  r.exams = {{"g1", 10.0}, {"g2", 30.0}};
  auto d = Dataset::create(r);
  const auto fit = exam_reliability_fit(d, ExamMode::Direct);
  EXPECT_DOUBLE_EQ(fit.reliability.at("g1"), 1e-6);
  EXPECT_DOUBLE_EQ(fit.reliability.at("g2"), 150.0);
  r.exams.erase("g2");
  try {
    exam_reliability_fit(Dataset::create(r), ExamMode::Direct);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingExam);
  }
}

TEST(Exam, HybridWithEqualExamsIsUmt) {
  auto c = fig1_left_config(4, 5);
  c.n_submissions = 20;
  c.n_graders = 20;
  auto data = generate(c);
  auto r = data.dataset.records();
  for (const auto& g : data.dataset.graders()) r.exams[g] = 42.0;
  const auto d = Dataset::create(r);
  EmConfig em;
  em.tolerance = 1e-13;
  em.max_iterations = 100000;
  const auto hybrid = exam_reliability_fit(d, ExamMode::Hybrid, {}, em);
  const auto umt = umt_fit(d, {}, em);
  for (const auto& [k, v] : umt.scores) EXPECT_NEAR(hybrid.scores.at(k), v, 1e-9);
}
