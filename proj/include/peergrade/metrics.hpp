#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "peergrade/dataset.hpp"

namespace peergrade {

/// Scores of the submissions of one exercise.
using ScoreVector = std::map<SubmissionId, double>;

namespace detail {

inline void require_same_keys(const ScoreVector& a, const ScoreVector& b, std::size_t min_size) {
  if (a.size() != b.size()) fail(ErrorKind::KeyMismatch, "score vectors have different sizes");
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib)
    if (ia->first != ib->first) fail(ErrorKind::KeyMismatch, "submission '" + ia->first + "' missing on one side");
  if (a.size() < min_size)
    fail(ErrorKind::InsufficientData, "need at least " + std::to_string(min_size) + " entries");
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// Root-mean-square deviation between estimate and truth.
inline double l2_error(const ScoreVector& estimated, const ScoreVector& truth) {
  detail::require_same_keys(estimated, truth, 1);
  double ss = 0.0;
  for (auto ie = estimated.begin(), it = truth.begin(); ie != estimated.end(); ++ie, ++it) {
    const double d = ie->second - it->second;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(estimated.size()));
}

/// Mean pairwise ranking disagreement: 0 for agreement (including pairs tied
/// on both sides), 1 for an inversion, 0.5 when exactly one side ties.
inline double kendall_tau_error(const ScoreVector& estimated, const ScoreVector& truth) {
  detail::require_same_keys(estimated, truth, 2);
  std::vector<double> x, y;
  x.reserve(estimated.size());
  y.reserve(truth.size());
  for (const auto& [k, v] : estimated) x.push_back(v);
  for (const auto& [k, v] : truth) y.push_back(v);

  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sx = detail::sign(x[i] - x[j]);
      const int sy = detail::sign(y[i] - y[j]);
      if (sx == sy) continue;
      total += (sx == 0 || sy == 0) ? 0.5 : 1.0;
    }
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail(ErrorKind::KeyMismatch, "pearson_r: sequences differ in length");
  if (xs.size() < 2) fail(ErrorKind::InsufficientData, "pearson_r: need at least 2 pairs");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorKind::UndefinedCorrelation, "pearson_r: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

enum class Metric { L2, Kendall };

inline std::string_view to_string(Metric m) { return m == Metric::L2 ? "l2" : "kendall"; }

struct PerExerciseErrors {
  std::map<ExerciseId, double> errors;
  /// Exercises that could not be scored (e.g. Kendall on a single submission).
  std::vector<std::string> warnings;
};

/// Splits keyed scores into one ScoreVector per exercise.
inline std::map<ExerciseId, ScoreVector> by_exercise(const std::map<SubmissionKey, double>& scores) {
  std::map<ExerciseId, ScoreVector> out;
  for (const auto& [k, v] : scores) out[k.exercise][k.submission] = v;
  return out;
}

/// Applies `metric` per exercise to every fitted submission against truth.
inline PerExerciseErrors per_exercise_errors(const std::map<SubmissionKey, double>& fitted, const TruthSet& truth,
                                             Metric metric) {
  PerExerciseErrors out;
  std::map<ExerciseId, std::pair<ScoreVector, ScoreVector>> split;
  for (const auto& [k, v] : fitted) {
    auto t = truth.find(k);
    if (!t) fail(ErrorKind::MissingTruth, "no truth for submission '" + k.submission + "' of exercise '" + k.exercise + "'");
    split[k.exercise].first[k.submission] = v;
    split[k.exercise].second[k.submission] = *t;
  }
  for (const auto& [e, pair] : split) {
    if (metric == Metric::Kendall && pair.first.size() < 2) {
      out.warnings.push_back("exercise '" + e + "' skipped: Kendall-tau needs at least 2 submissions");
      continue;
    }
    out.errors[e] = metric == Metric::L2 ? l2_error(pair.first, pair.second) : kendall_tau_error(pair.first, pair.second);
  }
  return out;
}

}  // namespace peergrade
