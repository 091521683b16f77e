#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include "peergrade/dataset.hpp"

namespace testing_support {

using namespace peergrade;

// Adds a submission authored by `authors` to the records.
inline void add_submission(DatasetRecords& r, const std::string& ex, const std::string& sub,
                           std::initializer_list<std::string> authors) {
  r.groups[sub] = std::set<GraderId>(authors);
  r.submission_exercise[sub] = ex;
}

inline void add_grade(DatasetRecords& r, const std::string& ex, const std::string& sub, const std::string& grader,
                      double value, GradeRole role = GradeRole::Peer) {
  r.grades.push_back({ex, sub, grader, role, value});
}

// Three submissions of one exercise, each authored by its own student, graded
// by two outside graders.
inline DatasetRecords tiny_records() {
  DatasetRecords r;
  r.exercises = {{"e1", 1.0}};
  add_submission(r, "e1", "s1", {"a1"});
  add_submission(r, "e1", "s2", {"a2"});
  add_submission(r, "e1", "s3", {"a3"});
  add_grade(r, "e1", "s1", "g1", 0.2);
  add_grade(r, "e1", "s1", "g2", 0.4);
  add_grade(r, "e1", "s2", "g1", 0.5);
  add_grade(r, "e1", "s2", "g2", 0.9);
  add_grade(r, "e1", "s3", "g1", 0.7);
  add_grade(r, "e1", "s3", "g2", 0.8);
  return r;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("peergrade_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str(const std::string& child = "") const { return child.empty() ? path.string() : (path / child).string(); }
};

}  // namespace testing_support

#include "peergrade/rng.hpp"

namespace testing_support {

// A random valid dataset: awkward ids (commas, quotes, spaces), mixed roles,
// ties in ballots, exam grades, and values spanning many magnitudes.
inline DatasetRecords random_records(peergrade::Rng& rng) {
  static const char* const alphabet[] = {"a", "b", "x", ",", "\"", " ", "-", "_", "7", "é"};
  auto id = [&](const std::string& prefix, std::size_t i) {
    std::string s = prefix + std::to_string(i);
    const std::size_t extra = rng.below(3);
    for (std::size_t k = 0; k < extra; ++k) s += alphabet[rng.below(std::size(alphabet))];
    return s;
  };
  auto value = [&] {
    switch (rng.below(4)) {
      case 0: return rng.uniform();
      case 1: return rng.normal(0.5, 0.3);
      case 2: return std::ldexp(rng.uniform(), -static_cast<int>(rng.below(60)));
      default: return std::round(rng.uniform(0.0, 100.0) * 4.0) / 4.0;
    }
  };

  DatasetRecords r;
  const std::size_t n_ex = 1 + rng.below(3);
  const std::size_t n_students = 2 + rng.below(8);
  std::vector<std::string> students;
  for (std::size_t i = 0; i < n_students; ++i) students.push_back(id("st", i));
  const std::size_t n_tas = rng.below(3);

  for (std::size_t e = 0; e < n_ex; ++e) {
    const std::string ex = id("ex", e);
    r.exercises.push_back({ex, rng.uniform(0.5, 20.0)});
    // Partition students into groups of 1-3.
    std::vector<std::string> order = students;
    rng.shuffle(std::span(order));
    std::vector<std::string> subs;
    for (std::size_t i = 0; i < order.size();) {
      const std::size_t size = std::min<std::size_t>(1 + rng.below(3), order.size() - i);
      const std::string sub = ex + "/" + id("s", subs.size());
      r.groups[sub] = std::set<GraderId>(order.begin() + static_cast<std::ptrdiff_t>(i),
                                         order.begin() + static_cast<std::ptrdiff_t>(i + size));
      subs.push_back(sub);
      i += size;
    }
    for (const auto& sub : subs) {
      const auto& members = r.groups[sub];
      bool graded = false;
      for (const auto& st : students) {
        const double p = rng.uniform();
        if (members.count(st)) {
          if (p < 0.5) r.grades.push_back({ex, sub, st, GradeRole::Self, value()}), graded = true;
        } else if (p < 0.4) {
          r.grades.push_back({ex, sub, st, GradeRole::Peer, value()});
          graded = true;
        }
      }
      for (std::size_t t = 0; t < n_tas; ++t)
        if (rng.uniform() < 0.5) r.grades.push_back({ex, sub, "ta" + std::to_string(t), GradeRole::Ta, value()}), graded = true;
      if (!graded) r.grades.push_back({ex, sub, "ta-fallback", GradeRole::Ta, value()});
    }
    // Ballots by some non-authors over their non-own submissions.
    for (const auto& st : students) {
      if (rng.uniform() < 0.5) continue;
      std::vector<std::string> pool;
      for (const auto& sub : subs)
        if (!r.groups[sub].count(st)) pool.push_back(sub);
      if (pool.size() < 2) continue;
      rng.shuffle(std::span(pool));
      pool.resize(2 + rng.below(pool.size() - 1));
      OrdinalBallot b{ex, st, {}};
      for (const auto& sub : pool) {
        if (b.ranking.empty() || rng.uniform() < 0.7) b.ranking.emplace_back();
        b.ranking.back().push_back(sub);
      }
      r.ballots.push_back(std::move(b));
    }
  }
  for (const auto& st : students)
    if (rng.uniform() < 0.5) r.exams[st] = rng.uniform(0.0, 100.0);
  return r;
}

}  // namespace testing_support
