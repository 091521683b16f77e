#pragma once

// Grading data model: exercises, submissions with their authoring groups,
// cardinal grades by role, ordinal ballots and exam grades.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "peergrade/error.hpp"

namespace peergrade {

using GraderId = std::string;
using SubmissionId = std::string;
using ExerciseId = std::string;

enum class GradeRole { Self, Peer, Ta };

using RoleSet = std::set<GradeRole>;

inline std::string_view to_string(GradeRole role) {
  switch (role) {
    case GradeRole::Self: return "self";
    case GradeRole::Peer: return "peer";
    case GradeRole::Ta: return "ta";
  }
  return "?";
}

inline std::optional<GradeRole> parse_role(std::string_view text) {
  if (text == "self") return GradeRole::Self;
  if (text == "peer") return GradeRole::Peer;
  if (text == "ta") return GradeRole::Ta;
  return std::nullopt;
}

inline std::string to_string(const RoleSet& roles) {
  std::string out;
  for (GradeRole r : roles) {
    if (!out.empty()) out += '+';
    out += to_string(r);
  }
  return out;
}

struct SubmissionKey {
  ExerciseId exercise;
  SubmissionId submission;
  auto operator<=>(const SubmissionKey&) const = default;
};

struct Exercise {
  ExerciseId id;
  double max_points = 1.0;
  auto operator<=>(const Exercise&) const = default;
};

struct CardinalGrade {
  ExerciseId exercise;
  SubmissionId submission;
  GraderId grader;
  GradeRole role = GradeRole::Peer;
  double value = 0.0;

  auto key() const { return std::tie(exercise, submission, grader, role); }
  bool operator==(const CardinalGrade&) const = default;
};

using TieGroup = std::vector<SubmissionId>;

/// One grader's ranking of submissions of one exercise, worst tie-group first.
struct OrdinalBallot {
  ExerciseId exercise;
  GraderId grader;
  std::vector<TieGroup> ranking;

  std::size_t item_count() const {
    std::size_t n = 0;
    for (const auto& g : ranking) n += g.size();
    return n;
  }
  bool strict() const {
    return std::all_of(ranking.begin(), ranking.end(), [](const TieGroup& g) { return g.size() == 1; });
  }
  bool operator==(const OrdinalBallot&) const = default;
};

/// Raw content of a dataset, before validation.
struct DatasetRecords {
  std::vector<Exercise> exercises;
  /// submission -> authoring group; registers every submission id.
  std::map<SubmissionId, std::set<GraderId>> groups;
  /// Optional explicit submission -> exercise map. Entries missing here are
  /// inferred from the grades and ballots that reference the submission.
  std::map<SubmissionId, ExerciseId> submission_exercise;
  std::vector<CardinalGrade> grades;
  std::vector<OrdinalBallot> ballots;
  std::map<GraderId, double> exams;
};

struct ValidationOptions {
  std::size_t max_group_size = 3;
};

/// A validated, immutable grading dataset. Records are held in canonical
/// order: grades by (exercise, submission, grader, role), ballots by
/// (exercise, grader) with each tie-group sorted.
class Dataset {
 public:
  Dataset() = default;

  static Dataset create(DatasetRecords records, const ValidationOptions& options = {}) {
    Dataset d;
    d.max_group_size_ = options.max_group_size;
    d.validate_and_adopt(std::move(records));
    return d;
  }

  const std::vector<Exercise>& exercises() const { return exercises_; }
  const std::map<SubmissionId, std::set<GraderId>>& groups() const { return groups_; }
  const std::map<SubmissionId, ExerciseId>& submission_exercise() const { return submission_exercise_; }
  const std::vector<CardinalGrade>& grades() const { return grades_; }
  const std::vector<OrdinalBallot>& ballots() const { return ballots_; }
  const std::map<GraderId, double>& exams() const { return exams_; }
  std::size_t max_group_size() const { return max_group_size_; }

  const Exercise& exercise(const ExerciseId& id) const {
    auto it = std::lower_bound(exercises_.begin(), exercises_.end(), id,
                               [](const Exercise& e, const ExerciseId& x) { return e.id < x; });
    if (it == exercises_.end() || it->id != id) fail(ErrorKind::DanglingId, "unknown exercise '" + id + "'");
    return *it;
  }

  bool has_exercise(const ExerciseId& id) const {
    return std::binary_search(exercises_.begin(), exercises_.end(), Exercise{id, 0.0},
                              [](const Exercise& a, const Exercise& b) { return a.id < b.id; });
  }

  const ExerciseId& exercise_of(const SubmissionId& s) const {
    auto it = submission_exercise_.find(s);
    if (it == submission_exercise_.end()) fail(ErrorKind::DanglingId, "unknown submission '" + s + "'");
    return it->second;
  }

  bool is_member(const GraderId& g, const SubmissionId& s) const {
    auto it = groups_.find(s);
    return it != groups_.end() && it->second.count(g) > 0;
  }

  std::vector<SubmissionId> submissions_of(const ExerciseId& e) const {
    std::vector<SubmissionId> out;
    for (const auto& [s, ex] : submission_exercise_)
      if (ex == e) out.push_back(s);
    return out;
  }

  /// Every grader id known to the dataset: group members, graders of grades
  /// and ballots, and exam takers.
  std::set<GraderId> graders() const {
    std::set<GraderId> out;
    for (const auto& [s, members] : groups_) out.insert(members.begin(), members.end());
    for (const auto& g : grades_) out.insert(g.grader);
    for (const auto& b : ballots_) out.insert(b.grader);
    for (const auto& [g, v] : exams_) out.insert(g);
    return out;
  }

  std::vector<CardinalGrade> grades_with(const RoleSet& roles) const {
    std::vector<CardinalGrade> out;
    for (const auto& g : grades_)
      if (roles.count(g.role)) out.push_back(g);
    return out;
  }

  DatasetRecords records() const {
    return DatasetRecords{exercises_, groups_, submission_exercise_, grades_, ballots_, exams_};
  }

  bool operator==(const Dataset&) const = default;

 private:
  static std::string describe(const CardinalGrade& g) {
    return "(exercise=" + g.exercise + ", submission=" + g.submission + ", grader=" + g.grader +
           ", role=" + std::string(to_string(g.role)) + ")";
  }

  void bind_exercise(const SubmissionId& s, const ExerciseId& e, const std::string& where) {
    if (!groups_.count(s)) fail(ErrorKind::DanglingId, where + ": submission '" + s + "' has no group entry");
    auto [it, inserted] = submission_exercise_.emplace(s, e);
    if (!inserted && it->second != e)
      fail(ErrorKind::Validation,
           where + ": submission '" + s + "' belongs to exercise '" + it->second + "', not '" + e + "'");
  }

  void validate_and_adopt(DatasetRecords r) {
    exercises_ = std::move(r.exercises);
    std::sort(exercises_.begin(), exercises_.end());
    for (std::size_t i = 0; i < exercises_.size(); ++i) {
      const auto& e = exercises_[i];
      if (e.id.empty()) fail(ErrorKind::Validation, "exercise with empty id");
      if (i > 0 && exercises_[i - 1].id == e.id) fail(ErrorKind::Validation, "duplicate exercise '" + e.id + "'");
      if (!std::isfinite(e.max_points) || e.max_points <= 0.0)
        fail(ErrorKind::InvalidExercise, "exercise '" + e.id + "' has non-positive maximum");
    }

    groups_ = std::move(r.groups);
    for (const auto& [s, members] : groups_) {
      if (s.empty()) fail(ErrorKind::Validation, "submission with empty id");
      if (members.empty()) fail(ErrorKind::Validation, "submission '" + s + "' has an empty group");
      if (members.size() > max_group_size_)
        fail(ErrorKind::Validation, "submission '" + s + "' has group size " + std::to_string(members.size()) +
                                        " > " + std::to_string(max_group_size_));
      for (const auto& g : members)
        if (g.empty()) fail(ErrorKind::Validation, "submission '" + s + "' has an empty member id");
    }

    for (const auto& [s, e] : r.submission_exercise) {
      if (!has_exercise(e)) fail(ErrorKind::DanglingId, "submission '" + s + "' references unknown exercise '" + e + "'");
      bind_exercise(s, e, "submission map");
    }

    grades_ = std::move(r.grades);
    for (std::size_t i = 0; i < grades_.size(); ++i) {
      const auto& g = grades_[i];
      const std::string where = "grades record #" + std::to_string(i) + " " + describe(g);
      if (g.grader.empty()) fail(ErrorKind::Validation, where + ": empty grader id");
      if (!has_exercise(g.exercise)) fail(ErrorKind::DanglingId, where + ": unknown exercise");
      bind_exercise(g.submission, g.exercise, where);
      if (!std::isfinite(g.value)) fail(ErrorKind::Validation, where + ": non-finite value");
      const bool member = is_member(g.grader, g.submission);
      if (g.role == GradeRole::Self && !member)
        fail(ErrorKind::RoleViolation, where + ": self grade by a non-member of the submission's group");
      if (g.role == GradeRole::Peer && member)
        fail(ErrorKind::RoleViolation, where + ": peer grade by a member of the submission's group");
    }
    std::stable_sort(grades_.begin(), grades_.end(),
                     [](const CardinalGrade& a, const CardinalGrade& b) { return a.key() < b.key(); });
    for (std::size_t i = 1; i < grades_.size(); ++i)
      if (grades_[i - 1].key() == grades_[i].key())
        fail(ErrorKind::DuplicateGrade, "duplicate grade " + describe(grades_[i]));

    ballots_ = std::move(r.ballots);
    for (std::size_t i = 0; i < ballots_.size(); ++i) {
      auto& b = ballots_[i];
      const std::string where = "ballots record #" + std::to_string(i) + " (exercise=" + b.exercise +
                                ", grader=" + b.grader + ")";
      if (b.grader.empty()) fail(ErrorKind::Validation, where + ": empty grader id");
      if (!has_exercise(b.exercise)) fail(ErrorKind::DanglingId, where + ": unknown exercise");
      std::set<SubmissionId> seen;
      for (auto& group : b.ranking) {
        if (group.empty()) fail(ErrorKind::Validation, where + ": empty tie-group");
        std::sort(group.begin(), group.end());
        for (const auto& s : group) {
          if (!seen.insert(s).second) fail(ErrorKind::Validation, where + ": submission '" + s + "' ranked twice");
          bind_exercise(s, b.exercise, where);
          if (is_member(b.grader, s))
            fail(ErrorKind::RoleViolation, where + ": grader ranks own group's submission '" + s + "'");
        }
      }
      if (seen.size() < 2) fail(ErrorKind::Validation, where + ": fewer than 2 submissions ranked");
    }
    std::sort(ballots_.begin(), ballots_.end(), [](const OrdinalBallot& a, const OrdinalBallot& b) {
      return std::tie(a.exercise, a.grader) < std::tie(b.exercise, b.grader);
    });
    for (std::size_t i = 1; i < ballots_.size(); ++i)
      if (ballots_[i - 1].exercise == ballots_[i].exercise && ballots_[i - 1].grader == ballots_[i].grader)
        fail(ErrorKind::Validation,
             "two ballots by grader '" + ballots_[i].grader + "' on exercise '" + ballots_[i].exercise + "'");

    for (const auto& [s, members] : groups_)
      if (!submission_exercise_.count(s))
        fail(ErrorKind::Validation, "submission '" + s + "' is not attached to any exercise");

    // A student authors at most one submission per exercise.
    std::set<std::pair<ExerciseId, GraderId>> authorship;
    for (const auto& [s, members] : groups_)
      for (const auto& g : members)
        if (!authorship.emplace(submission_exercise_.at(s), g).second)
          fail(ErrorKind::Validation, "grader '" + g + "' is in two groups of exercise '" + submission_exercise_.at(s) + "'");

    exams_ = std::move(r.exams);
    for (const auto& [g, v] : exams_) {
      if (g.empty()) fail(ErrorKind::Validation, "exam grade with empty grader id");
      if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::Validation, "exam grade of '" + g + "' is negative");
    }
  }

  std::vector<Exercise> exercises_;
  std::map<SubmissionId, std::set<GraderId>> groups_;
  std::map<SubmissionId, ExerciseId> submission_exercise_;
  std::vector<CardinalGrade> grades_;
  std::vector<OrdinalBallot> ballots_;
  std::map<GraderId, double> exams_;
  std::size_t max_group_size_ = 3;
};

enum class TruthProvenance { Ta, Synthetic };

struct TruthSet {
  std::map<SubmissionKey, double> scores;
  TruthProvenance provenance = TruthProvenance::Synthetic;

  std::optional<double> find(const SubmissionKey& key) const {
    auto it = scores.find(key);
    if (it == scores.end()) return std::nullopt;
    return it->second;
  }
  bool operator==(const TruthSet&) const = default;
};

/// Truth taken from TA grades; submissions with several TA grades get their mean.
inline TruthSet truth_from_ta(const Dataset& d) {
  std::map<SubmissionKey, std::pair<double, int>> acc;
  for (const auto& g : d.grades()) {
    if (g.role != GradeRole::Ta) continue;
    auto& [sum, n] = acc[{g.exercise, g.submission}];
    sum += g.value;
    ++n;
  }
  TruthSet t;
  t.provenance = TruthProvenance::Ta;
  for (const auto& [k, v] : acc) t.scores[k] = v.first / v.second;
  return t;
}

enum class NormalizeMode { UnitInterval, ZScore };

/// Rescales every exercise's grades. Unit-interval mode divides by the
/// declared maximum and sets the maximum to 1; z-score mode standardizes
/// each exercise's grades to sample mean 0 and sample variance 1.
inline Dataset normalize_scores(const Dataset& d, NormalizeMode mode) {
  DatasetRecords r = d.records();
  if (mode == NormalizeMode::UnitInterval) {
    std::map<ExerciseId, double> max;
    for (auto& e : r.exercises) {
      if (!(e.max_points > 0.0)) fail(ErrorKind::InvalidExercise, "exercise '" + e.id + "' has zero maximum");
      max[e.id] = e.max_points;
      e.max_points = 1.0;
    }
    for (auto& g : r.grades) g.value /= max.at(g.exercise);
  } else {
    std::map<ExerciseId, std::vector<double>> values;
    for (const auto& g : r.grades) values[g.exercise].push_back(g.value);
    std::map<ExerciseId, std::pair<double, double>> stats;
    for (const auto& e : r.exercises) {
      const auto& v = values[e.id];
      if (v.size() < 2) fail(ErrorKind::DegenerateExercise, "exercise '" + e.id + "' has fewer than 2 grades");
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      if (!(sd > 0.0)) fail(ErrorKind::DegenerateExercise, "exercise '" + e.id + "' has zero grade variance");
      stats[e.id] = {mean, sd};
    }
    for (auto& g : r.grades) {
      const auto [mean, sd] = stats.at(g.exercise);
      g.value = (g.value - mean) / sd;
    }
  }
  return Dataset::create(std::move(r), ValidationOptions{d.max_group_size()});
}

/// One ballot per (grader, exercise) with at least two graded submissions
/// among the selected roles; equal values share a tie-group.
inline std::vector<OrdinalBallot> induce_ballots(const Dataset& d, const RoleSet& roles) {
  std::map<std::pair<ExerciseId, GraderId>, std::vector<std::pair<double, SubmissionId>>> by_grader;
  for (const auto& g : d.grades())
    if (roles.count(g.role)) by_grader[{g.exercise, g.grader}].emplace_back(g.value, g.submission);

  std::vector<OrdinalBallot> out;
  for (auto& [key, items] : by_grader) {
    // A grader holding two roles on one submission keeps the first value seen.
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    items.erase(std::unique(items.begin(), items.end(),
                            [](const auto& a, const auto& b) { return a.second == b.second; }),
                items.end());
    if (items.size() < 2) continue;
    std::sort(items.begin(), items.end());
    OrdinalBallot b{key.first, key.second, {}};
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i == 0 || items[i].first != items[i - 1].first) b.ranking.emplace_back();
      b.ranking.back().push_back(items[i].second);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace peergrade
