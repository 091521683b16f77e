#pragma once

// Synthetic grading data drawn from the Gaussian bias/reliability model.
//
// Per grader: bias ~ N(0, bias_sd^2), reliability ~ Gamma(shape, rate).
// Per submission: true score from the truth model. Each submission receives
// exactly k peer grades from non-members, assigned by a balanced random
// design; a grade is N(true + bias, 1/reliability), or Uniform[0,1] for
// graders designated random.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "peergrade/dataset.hpp"
#include "peergrade/rng.hpp"

namespace peergrade {

enum class TruthModel { Normal, Weibull };

enum class ExamModel {
  None,
  /// exam grade = reliability * exam_scale, i.e. reliability proportional to the exam.
  ProportionalToReliability,
};

struct GeneratorConfig {
  std::size_t n_submissions = 100;
  std::size_t n_graders = 100;
  std::size_t n_exercises = 5;
  std::size_t grades_per_submission = 6;
  std::uint64_t seed = 0;

  TruthModel truth_model = TruthModel::Normal;
  double truth_mean = 0.5;
  double truth_sd = 1.0 / 6.0;
  double weibull_shape = 1.5;
  double weibull_scale = 1.0 / 3.0;

  double bias_sd = 1.0 / 8.0;
  double reliability_shape = 3.0;
  double reliability_rate = 1.0 / 30.0;
  /// Replaces the reliability draw for every grader (noise-free limits).
  std::optional<double> fixed_reliability;
  std::size_t n_random_graders = 0;
  bool clip_to_unit = true;
  /// Redraw bias and reliability for every exercise (single-task studies).
  bool redraw_per_exercise = false;

  /// Every group member also grades the group's own submission.
  bool self_grades = false;
  /// Number of TAs; each submission gets one TA grade equal to its true score plus ta_noise_sd noise.
  std::size_t n_tas = 0;
  double ta_noise_sd = 0.0;

  ExamModel exam_model = ExamModel::None;
  double exam_scale = 1.0;
};

struct GraderTraits {
  double bias = 0.0;
  double reliability = 0.0;
  bool random = false;
};

struct GeneratedData {
  Dataset dataset;
  TruthSet truth;
  /// Traits of the first (or only) draw per grader.
  std::map<GraderId, GraderTraits> traits;
};

/// Normal truth, default priors, unclipped grades.
inline GeneratorConfig fig1_left_config(std::size_t k, std::uint64_t seed) {
  GeneratorConfig c;
  c.grades_per_submission = k;
  c.seed = seed;
  c.clip_to_unit = false;
  return c;
}

/// Model mismatch: Weibull truth and 20 uniformly random graders.
inline GeneratorConfig fig1_right_config(std::size_t k, std::uint64_t seed) {
  GeneratorConfig c = fig1_left_config(k, seed);
  c.truth_model = TruthModel::Weibull;
  c.n_random_graders = 20;
  return c;
}

/// Course-shaped data: 79 groups of 2-3 out of 219 students, 19 exercises,
/// self, peer and TA grades, clipped to [0,1], peer-grade mean near 0.72.
inline GeneratorConfig ad_shaped_config(std::uint64_t seed) {
  GeneratorConfig c;
  c.n_submissions = 79;
  c.n_graders = 219;
  c.n_exercises = 19;
  c.grades_per_submission = 6;
  c.seed = seed;
  c.truth_mean = 0.74;
  c.truth_sd = 0.2;
  c.bias_sd = 0.06;
  c.reliability_rate = 1.0 / 15.0;
  c.clip_to_unit = true;
  c.self_grades = true;
  c.n_tas = 6;
  return c;
}

inline std::string padded_id(const std::string& prefix, std::size_t index, std::size_t count) {
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

inline void validate(const GeneratorConfig& c) {
  if (c.n_submissions == 0 || c.n_graders == 0 || c.n_exercises == 0)
    fail(ErrorKind::Precondition, "generator needs at least one submission, grader and exercise");
  if (c.grades_per_submission == 0) fail(ErrorKind::Precondition, "grades per submission must be at least 1");
  if (c.n_random_graders > c.n_graders) fail(ErrorKind::Precondition, "more random graders than graders");
  if (c.bias_sd < 0.0 || c.truth_sd < 0.0 || c.ta_noise_sd < 0.0) fail(ErrorKind::Precondition, "negative standard deviation");
  if (!(c.reliability_shape > 0.0) || !(c.reliability_rate > 0.0))
    fail(ErrorKind::Precondition, "reliability prior needs positive shape and rate");
  if (c.fixed_reliability && !(*c.fixed_reliability > 0.0)) fail(ErrorKind::Precondition, "fixed reliability must be positive");
  if (c.truth_model == TruthModel::Weibull && (!(c.weibull_shape > 0.0) || !(c.weibull_scale > 0.0)))
    fail(ErrorKind::Precondition, "Weibull parameters must be positive");
}

inline GeneratedData generate(const GeneratorConfig& c) {
  validate(c);
  Rng rng(c.seed);

  // Team i authors submission i of every exercise; graders are dealt onto
  // teams round-robin. Teams left without a grader get a non-grading author.
  std::vector<std::vector<std::size_t>> team(c.n_submissions);
  std::vector<std::size_t> team_of(c.n_graders);
  for (std::size_t g = 0; g < c.n_graders; ++g) {
    team_of[g] = g % c.n_submissions;
    team[team_of[g]].push_back(g);
  }
  const std::size_t max_team = (c.n_graders + c.n_submissions - 1) / c.n_submissions;
  const std::size_t nonmembers = c.n_graders - std::min(max_team, c.n_graders);
  if (c.grades_per_submission > nonmembers)
    fail(ErrorKind::InfeasibleAssignment,
         "cannot assign " + std::to_string(c.grades_per_submission) + " distinct peer graders per submission: only " +
             std::to_string(nonmembers) + " non-member graders available");

  std::vector<GraderId> grader_ids(c.n_graders);
  for (std::size_t g = 0; g < c.n_graders; ++g) grader_ids[g] = padded_id("g", g, c.n_graders);

  std::vector<std::size_t> order(c.n_graders);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<bool> is_random(c.n_graders, false);
  for (std::size_t i = 0; i < c.n_random_graders; ++i) is_random[order[i]] = true;

  std::vector<double> bias(c.n_graders), reliability(c.n_graders);
  auto draw_traits = [&] {
    for (std::size_t g = 0; g < c.n_graders; ++g) {
      bias[g] = c.bias_sd > 0.0 ? rng.normal(0.0, c.bias_sd) : 0.0;
      reliability[g] = c.fixed_reliability ? *c.fixed_reliability : rng.gamma(c.reliability_shape, c.reliability_rate);
    }
  };
  draw_traits();

  GeneratedData out;
  for (std::size_t g = 0; g < c.n_graders; ++g) out.traits[grader_ids[g]] = {bias[g], reliability[g], is_random[g]};

  DatasetRecords r;
  auto observe = [&](std::size_t g, double truth) {
    double v = is_random[g] ? rng.uniform() : rng.normal(truth + bias[g], 1.0 / std::sqrt(reliability[g]));
    if (c.clip_to_unit) v = std::clamp(v, 0.0, 1.0);
    return v;
  };

  std::vector<std::size_t> load(c.n_graders);
  std::vector<std::uint64_t> tiebreak(c.n_graders);
  std::vector<std::size_t> candidates;
  for (std::size_t e = 0; e < c.n_exercises; ++e) {
    if (e > 0 && c.redraw_per_exercise) draw_traits();
    const ExerciseId ex = padded_id("ex", e + 1, c.n_exercises + 1);
    r.exercises.push_back({ex, 1.0});

    std::vector<SubmissionId> subs(c.n_submissions);
    std::vector<double> truth(c.n_submissions);
    for (std::size_t s = 0; s < c.n_submissions; ++s) {
      subs[s] = ex + "-" + padded_id("s", s, c.n_submissions);
      double t = c.truth_model == TruthModel::Normal ? rng.normal(c.truth_mean, c.truth_sd)
                                                     : rng.weibull(c.weibull_shape, c.weibull_scale);
      if (c.clip_to_unit) t = std::clamp(t, 0.0, 1.0);
      truth[s] = t;
      out.truth.scores[{ex, subs[s]}] = t;
      r.submission_exercise[subs[s]] = ex;
      auto& members = r.groups[subs[s]];
      for (std::size_t g : team[s]) members.insert(grader_ids[g]);
      if (team[s].empty()) members.insert(padded_id("author", s, c.n_submissions));
    }

    // Balanced assignment: visit submissions in random order, give each the k
    // least-loaded eligible graders, ties broken by fresh random keys.
    std::fill(load.begin(), load.end(), 0);
    std::vector<std::size_t> visit(c.n_submissions);
    std::iota(visit.begin(), visit.end(), 0);
    rng.shuffle(std::span(visit));
    for (std::size_t s : visit) {
      candidates.clear();
      for (std::size_t g = 0; g < c.n_graders; ++g) {
        if (team_of[g] == s) continue;
        candidates.push_back(g);
        tiebreak[g] = rng.next_u64();
      }
      const auto k = c.grades_per_submission;
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                        [&](std::size_t a, std::size_t b) {
                          return load[a] != load[b] ? load[a] < load[b] : tiebreak[a] < tiebreak[b];
                        });
      std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t g = candidates[i];
        ++load[g];
        r.grades.push_back({ex, subs[s], grader_ids[g], GradeRole::Peer, observe(g, truth[s])});
      }
    }

    for (std::size_t s = 0; s < c.n_submissions; ++s) {
      if (c.self_grades)
        for (std::size_t g : team[s]) r.grades.push_back({ex, subs[s], grader_ids[g], GradeRole::Self, observe(g, truth[s])});
      if (c.n_tas > 0) {
        const auto ta = static_cast<std::size_t>(rng.below(c.n_tas));
        double v = truth[s] + (c.ta_noise_sd > 0.0 ? rng.normal(0.0, c.ta_noise_sd) : 0.0);
        if (c.clip_to_unit) v = std::clamp(v, 0.0, 1.0);
        r.grades.push_back({ex, subs[s], padded_id("ta", ta, c.n_tas), GradeRole::Ta, v});
      }
    }
  }

  if (c.exam_model == ExamModel::ProportionalToReliability)
    for (std::size_t g = 0; g < c.n_graders; ++g) r.exams[grader_ids[g]] = reliability[g] * c.exam_scale;

  out.dataset = Dataset::create(std::move(r), ValidationOptions{std::max<std::size_t>(max_team, 1)});
  return out;
}

/// Adds independent N(0, noise_sd^2) noise to every true score.
inline TruthSet perturb_truth(const TruthSet& truth, double noise_sd, std::uint64_t seed) {
  if (noise_sd < 0.0) fail(ErrorKind::Precondition, "noise sd must be non-negative");
  TruthSet out = truth;
  if (noise_sd == 0.0) return out;
  Rng rng(seed);
  for (auto& [k, v] : out.scores) v += rng.normal(0.0, noise_sd);
  return out;
}

inline std::string_view to_string(TruthModel m) { return m == TruthModel::Normal ? "normal" : "weibull"; }

inline nlohmann::json to_json(const GeneratorConfig& c) {
  nlohmann::json j;
  j["n_submissions"] = c.n_submissions;
  j["n_graders"] = c.n_graders;
  j["n_exercises"] = c.n_exercises;
  j["grades_per_submission"] = c.grades_per_submission;
  j["seed"] = c.seed;
  j["truth_model"] = std::string(to_string(c.truth_model));
  j["truth_mean"] = c.truth_mean;
  j["truth_sd"] = c.truth_sd;
  j["weibull_shape"] = c.weibull_shape;
  j["weibull_scale"] = c.weibull_scale;
  j["bias_sd"] = c.bias_sd;
  j["reliability_shape"] = c.reliability_shape;
  j["reliability_rate"] = c.reliability_rate;
  j["fixed_reliability"] = c.fixed_reliability ? nlohmann::json(*c.fixed_reliability) : nlohmann::json(nullptr);
  j["n_random_graders"] = c.n_random_graders;
  j["clip_to_unit"] = c.clip_to_unit;
  j["redraw_per_exercise"] = c.redraw_per_exercise;
  j["self_grades"] = c.self_grades;
  j["n_tas"] = c.n_tas;
  j["ta_noise_sd"] = c.ta_noise_sd;
  j["exam_model"] = c.exam_model == ExamModel::None ? "none" : "proportional_to_reliability";
  j["exam_scale"] = c.exam_scale;
  return j;
}

}  // namespace peergrade
