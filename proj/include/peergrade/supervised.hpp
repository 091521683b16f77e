#pragma once

// Estimators and analyses that use (partial) ground truth: the bias-corrected
// mean, the truth-anchored multi-task model, exam-informed reliabilities,
// and per-grader diagnostics and correlations.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peergrade/cardinal.hpp"
#include "peergrade/dataset.hpp"
#include "peergrade/metrics.hpp"
#include "peergrade/rng.hpp"

namespace peergrade {

struct TrainTestSplit {
  std::set<SubmissionKey> train;
  std::set<SubmissionKey> test;
  std::uint64_t seed = 0;
  double fraction = 0.5;
};

/// Per exercise, a random round(fraction * n) of the keys go to train.
inline TrainTestSplit make_split(const std::set<SubmissionKey>& keys, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(ErrorKind::Precondition, "train fraction must lie in (0, 1)");
  TrainTestSplit split;
  split.seed = seed;
  split.fraction = fraction;
  std::map<ExerciseId, std::vector<SubmissionKey>> per;
  for (const auto& k : keys) per[k.exercise].push_back(k);
  Rng rng(seed);
  for (auto& [e, items] : per) {
    rng.shuffle(std::span(items));
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size())));
    for (std::size_t i = 0; i < items.size(); ++i) (i < n_train ? split.train : split.test).insert(items[i]);
  }
  return split;
}

inline TrainTestSplit make_split(const TruthSet& truth, double fraction, std::uint64_t seed) {
  std::set<SubmissionKey> keys;
  for (const auto& [k, v] : truth.scores) keys.insert(k);
  return make_split(keys, fraction, seed);
}

struct GraderBias {
  double bias = 0.0;
  std::size_t support = 0;  // 0 means no training grade: bias defaulted to 0
};

/// Keyed by grader, or by "grader@exercise" when estimated per exercise.
using BiasMap = std::map<std::string, GraderBias>;

inline std::string bias_key(const GraderId& g, const ExerciseId& e, bool per_exercise) {
  return per_exercise ? g + "@" + e : g;
}

/// bias(g) = mean over g's grades on training submissions of (grade - truth).
/// Graders in the dataset without training support get bias 0, support 0.
inline BiasMap estimate_grader_bias(const Dataset& d, const TruthSet& truth, const std::set<SubmissionKey>& train,
                                    const RoleSet& roles = {GradeRole::Peer}, bool per_exercise = false) {
  BiasMap out;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& g : d.grades()) {
    if (!roles.count(g.role)) continue;
    const auto key = bias_key(g.grader, g.exercise, per_exercise);
    out.try_emplace(key);
    const SubmissionKey sk{g.exercise, g.submission};
    if (!train.count(sk)) continue;
    auto t = truth.find(sk);
    if (!t) continue;
    auto& [sum, n] = acc[key];
    sum += g.value - *t;
    ++n;
  }
  for (const auto& [key, v] : acc) out[key] = {v.first / static_cast<double>(v.second), v.second};
  return out;
}

/// Mean of bias-corrected grades on every test submission.
inline ModelFit sn_estimate(const Dataset& d, const BiasMap& biases, const std::set<SubmissionKey>& test,
                            const RoleSet& roles = {GradeRole::Peer}, bool per_exercise = false) {
  std::map<SubmissionKey, std::pair<double, std::size_t>> acc;
  for (const auto& g : d.grades()) {
    if (!roles.count(g.role)) continue;
    const SubmissionKey sk{g.exercise, g.submission};
    if (!test.count(sk)) continue;
    double b = 0.0;
    if (auto it = biases.find(bias_key(g.grader, g.exercise, per_exercise)); it != biases.end()) b = it->second.bias;
    acc[sk].first += g.value - b;
    ++acc[sk].second;
  }
  ModelFit fit;
  for (const auto& k : test) {
    auto it = acc.find(k);
    if (it == acc.end())
      fail(ErrorKind::InsufficientData, "test submission '" + k.submission + "' has no " + to_string(roles) + " grade");
    fit.scores[k] = it->second.first / static_cast<double>(it->second.second);
  }
  return fit;
}

inline ModelFit sn_estimate(const Dataset& d, const TruthSet& truth, const TrainTestSplit& split,
                            const RoleSet& roles = {GradeRole::Peer}, bool per_exercise = false) {
  return sn_estimate(d, estimate_grader_bias(d, truth, split.train, roles, per_exercise), split.test, roles,
                     per_exercise);
}

inline const GraderId& ta_pseudo_grader() {
  static const GraderId id = "__ta__";
  return id;
}

/// UMT with one extra grade per anchored submission from a pseudo-grader
/// whose reliability is held at `ta_reliability` and whose bias is held at 0.
inline ModelFit smt_fit(const Dataset& d, const TruthSet& truth, const std::set<SubmissionKey>& anchored,
                        const Hyperparams& hyper = {}, double ta_reliability = 1000.0, const EmConfig& config = {},
                        const RoleSet& roles = {GradeRole::Peer}) {
  if (!(ta_reliability > 0.0)) fail(ErrorKind::Precondition, "TA reliability must be positive");
  GaussianFitOptions o;
  o.roles = roles;
  for (const auto& k : anchored) {
    auto t = truth.find(k);
    if (!t) fail(ErrorKind::MissingTruth, "anchored submission '" + k.submission + "' has no truth");
    o.extra_grades.push_back({k.exercise, k.submission, ta_pseudo_grader(), GradeRole::Ta, *t});
  }
  if (!anchored.empty()) {
    o.fixed_reliability[ta_pseudo_grader()] = ta_reliability;
    o.fixed_bias.insert(ta_pseudo_grader());
    o.hidden_graders.insert(ta_pseudo_grader());
  }
  return fit_gaussian(d, hyper, config, o);
}

/// (1/k) sum |(grade - bias) - truth| over every graded submission with truth,
/// where bias is estimated from those same submissions.
inline std::map<GraderId, double> mean_deviation(const Dataset& d, const TruthSet& truth,
                                                 const RoleSet& roles = {GradeRole::Peer}) {
  std::set<SubmissionKey> all;
  for (const auto& [k, v] : truth.scores) all.insert(k);
  const BiasMap biases = estimate_grader_bias(d, truth, all, roles);
  std::map<GraderId, std::pair<double, std::size_t>> acc;
  for (const auto& g : d.grades()) {
    if (!roles.count(g.role)) continue;
    auto t = truth.find({g.exercise, g.submission});
    if (!t) continue;
    acc[g.grader].first += std::abs(g.value - biases.at(g.grader).bias - *t);
    ++acc[g.grader].second;
  }
  std::map<GraderId, double> out;
  for (const auto& [g, v] : acc) out[g] = v.first / static_cast<double>(v.second);
  return out;
}

struct GraderDiagnostics {
  double mean_given_grade = 0.0;
  /// Sample mean of (own grade - mean of the other grades on the same submission).
  double peer_relative_bias = 0.0;
  /// Sample variance of those deviations.
  double peer_relative_variance = 0.0;
  std::size_t support = 0;
};

struct DiagnosticsReport {
  std::map<GraderId, GraderDiagnostics> graders;
  /// Graders skipped for lack of support, with the reason.
  std::map<GraderId, std::string> skipped;
};

inline DiagnosticsReport grader_diagnostics(const Dataset& d, const RoleSet& roles = {GradeRole::Peer, GradeRole::Ta}) {
  std::map<SubmissionKey, std::vector<const CardinalGrade*>> per_submission;
  std::map<GraderId, std::vector<double>> given;
  for (const auto& g : d.grades()) {
    if (!roles.count(g.role)) continue;
    per_submission[{g.exercise, g.submission}].push_back(&g);
    given[g.grader].push_back(g.value);
  }
  std::map<GraderId, std::vector<double>> deviations;
  for (const auto& [k, grades] : per_submission) {
    if (grades.size() < 2) continue;
    double total = 0.0;
    for (const auto* g : grades) total += g->value;
    const double others = static_cast<double>(grades.size() - 1);
    for (const auto* g : grades) deviations[g->grader].push_back(g->value - (total - g->value) / others);
  }
  DiagnosticsReport report;
  for (const auto& [grader, values] : given) {
    auto it = deviations.find(grader);
    const std::size_t n = it == deviations.end() ? 0 : it->second.size();
    if (n < 2) {
      report.skipped[grader] = "fewer than 2 graded submissions with another grade";
      continue;
    }
    GraderDiagnostics diag;
    diag.mean_given_grade = mean_of(values);
    diag.peer_relative_bias = mean_of(it->second);
    double ss = 0.0;
    for (double x : it->second) ss += (x - diag.peer_relative_bias) * (x - diag.peer_relative_bias);
    diag.peer_relative_variance = ss / static_cast<double>(n - 1);
    diag.support = n;
    report.graders[grader] = diag;
  }
  return report;
}

struct CorrelationReport {
  std::optional<double> r_homework_bias;
  std::optional<double> r_homework_deviation;
  std::optional<double> r_exam_homework;
  std::optional<double> r_exam_bias;
  std::optional<double> r_exam_deviation;
  std::map<std::string, std::size_t> sample_sizes;
  std::vector<std::string> notes;
};

/// Homework performance of a grader: mean truth over the submissions of the
/// groups the grader belongs to.
inline std::map<GraderId, double> homework_performance(const Dataset& d, const TruthSet& truth) {
  std::map<GraderId, std::pair<double, std::size_t>> acc;
  for (const auto& [s, members] : d.groups()) {
    auto t = truth.find({d.exercise_of(s), s});
    if (!t) continue;
    for (const auto& g : members) {
      acc[g].first += *t;
      ++acc[g].second;
    }
  }
  std::map<GraderId, double> out;
  for (const auto& [g, v] : acc) out[g] = v.first / static_cast<double>(v.second);
  return out;
}

inline CorrelationReport correlation_report(const Dataset& d, const TruthSet& truth,
                                            const RoleSet& roles = {GradeRole::Peer}) {
  CorrelationReport report;
  const auto homework = homework_performance(d, truth);
  std::set<SubmissionKey> all;
  for (const auto& [k, v] : truth.scores) all.insert(k);
  const BiasMap biases = estimate_grader_bias(d, truth, all, roles);
  const auto deviation = mean_deviation(d, truth, roles);

  auto correlate = [&](const std::string& name, const std::map<GraderId, double>& xs,
                       const std::map<GraderId, double>& ys) -> std::optional<double> {
    std::vector<double> a, b;
    for (const auto& [g, x] : xs)
      if (auto it = ys.find(g); it != ys.end()) {
        a.push_back(x);
        b.push_back(it->second);
      }
    report.sample_sizes[name] = a.size();
    try {
      return pearson_r(a, b);
    } catch (const Error& e) {
      report.notes.push_back(name + ": " + e.what());
      return std::nullopt;
    }
  };

  std::map<GraderId, double> bias_values;
  for (const auto& [g, b] : biases)
    if (b.support > 0) bias_values[g] = b.bias;

  report.r_homework_bias = correlate("r_homework_bias", homework, bias_values);
  report.r_homework_deviation = correlate("r_homework_deviation", homework, deviation);
  if (d.exams().empty()) {
    report.notes.push_back("no exam grades: exam correlations omitted");
  } else {
    report.r_exam_homework = correlate("r_exam_homework", d.exams(), homework);
    report.r_exam_bias = correlate("r_exam_bias", d.exams(), bias_values);
    report.r_exam_deviation = correlate("r_exam_deviation", d.exams(), deviation);
  }
  return report;
}

enum class ExamMode { Direct, Hybrid };

/// Direct: reliabilities fixed to the exam grade mapped linearly from
/// [min, max] onto [0, 150]. Hybrid: UMT, then each reliability scaled by
/// exam / mean exam and the scores re-estimated once.
inline ModelFit exam_reliability_fit(const Dataset& d, ExamMode mode, const Hyperparams& hyper = {},
                                     const EmConfig& config = {}, const RoleSet& roles = {GradeRole::Peer}) {
  const auto& exams = d.exams();
  std::set<GraderId> graders;
  for (const auto& g : d.grades())
    if (roles.count(g.role) && g.role != GradeRole::Ta) graders.insert(g.grader);
  for (const auto& g : graders)
    if (!exams.count(g)) fail(ErrorKind::MissingExam, "grader '" + g + "' has no exam grade");

  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  for (const auto& g : graders) {
    const double x = exams.at(g);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
  }

  if (mode == ExamMode::Direct) {
    if (!(hi > lo)) fail(ErrorKind::Precondition, "direct exam mode needs at least two distinct exam grades");
    GaussianFitOptions o;
    o.roles = roles;
    for (const auto& g : graders) o.fixed_reliability[g] = 150.0 * (exams.at(g) - lo) / (hi - lo);
    return fit_gaussian(d, hyper, config, o);
  }

  const double mean_exam = sum / static_cast<double>(graders.size());
  if (!(mean_exam > 0.0)) fail(ErrorKind::Precondition, "hybrid exam mode needs a positive mean exam grade");
  GaussianFitOptions o;
  o.roles = roles;
  GaussianModel model(d, hyper, config, o);
  model.run();
  for (std::size_t i = 0; i < model.graders().size(); ++i) {
    const auto& g = model.graders()[i];
    model.set_reliability(g, model.reliability(i) * exams.at(g) / mean_exam);
  }
  model.update_scores();
  ModelFit fit = model.result();
  return fit;
}

}  // namespace peergrade
