#pragma once

// Dataset and truth serialization.
//
// CSV format: a directory holding
//   exercises.csv  exercise,max_points
//   groups.csv     submission,grader
//   grades.csv     exercise,submission,grader,role,value     (role: self|peer|ta)
//   ballots.csv    exercise,grader,position,submission       (position: 0-based tie-group, worst first)
//   exams.csv      grader,exam_grade
// ballots.csv and exams.csv may be absent on load. A submission's exercise is
// taken from the grades and ballots that reference it.
//
// JSON format: one document with arrays "exercises", "groups", "grades",
// "ballots", "exams" whose objects carry the CSV column names as keys.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "peergrade/csv.hpp"
#include "peergrade/dataset.hpp"

namespace peergrade {

enum class FileFormat { Csv, Json };

namespace detail {

inline std::string row_ref(const std::string& file, std::size_t line) {
  return file + " line " + std::to_string(line);
}

inline double require_number(const std::string& text, const std::string& where) {
  auto v = csv::parse_number(text);
  if (!v) fail(ErrorKind::Schema, where + ": '" + text + "' is not a number");
  return *v;
}

inline GradeRole require_role(const std::string& text, const std::string& where) {
  auto r = parse_role(text);
  if (!r) fail(ErrorKind::Schema, where + ": role must be self, peer or ta, got '" + text + "'");
  return *r;
}

/// Collects (exercise, grader, position, submission) rows into ballots.
class BallotAssembler {
 public:
  void add(const ExerciseId& e, const GraderId& g, long long position, const SubmissionId& s,
           const std::string& where) {
    if (position < 0) fail(ErrorKind::Schema, where + ": negative position");
    auto& groups = rows_[{e, g}];
    groups[position].push_back(s);
  }

  std::vector<OrdinalBallot> finish() const {
    std::vector<OrdinalBallot> out;
    for (const auto& [key, groups] : rows_) {
      OrdinalBallot b{key.first, key.second, {}};
      long long expect = 0;
      for (const auto& [pos, members] : groups) {
        if (pos != expect)
          fail(ErrorKind::Schema, "ballot (exercise=" + key.first + ", grader=" + key.second +
                                      "): tie-group positions are not contiguous from 0");
        b.ranking.push_back(members);
        ++expect;
      }
      out.push_back(std::move(b));
    }
    return out;
  }

 private:
  std::map<std::pair<ExerciseId, GraderId>, std::map<long long, TieGroup>> rows_;
};

inline DatasetRecords load_csv_records(const std::filesystem::path& dir) {
  DatasetRecords r;
  const auto file = [&](const char* name) { return (dir / name).string(); };

  {
    auto t = csv::read_table(file("exercises.csv"), {"exercise", "max_points"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto where = row_ref("exercises.csv", t.lines[i]);
      r.exercises.push_back({t.rows[i][0], require_number(t.rows[i][1], where)});
    }
  }
  {
    auto t = csv::read_table(file("groups.csv"), {"submission", "grader"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (!r.groups[t.rows[i][0]].insert(t.rows[i][1]).second)
        fail(ErrorKind::Schema, row_ref("groups.csv", t.lines[i]) + ": duplicate membership row");
    }
  }
  {
    auto t = csv::read_table(file("grades.csv"), {"exercise", "submission", "grader", "role", "value"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& row = t.rows[i];
      const auto where = row_ref("grades.csv", t.lines[i]);
      r.grades.push_back({row[0], row[1], row[2], require_role(row[3], where), require_number(row[4], where)});
    }
  }
  if (std::filesystem::exists(dir / "ballots.csv")) {
    auto t = csv::read_table(file("ballots.csv"), {"exercise", "grader", "position", "submission"});
    BallotAssembler assembler;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& row = t.rows[i];
      const auto where = row_ref("ballots.csv", t.lines[i]);
      auto pos = csv::parse_integer(row[2]);
      if (!pos) fail(ErrorKind::Schema, where + ": position must be an integer");
      assembler.add(row[0], row[1], *pos, row[3], where);
    }
    r.ballots = assembler.finish();
  }
  if (std::filesystem::exists(dir / "exams.csv")) {
    auto t = csv::read_table(file("exams.csv"), {"grader", "exam_grade"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto where = row_ref("exams.csv", t.lines[i]);
      if (!r.exams.emplace(t.rows[i][0], require_number(t.rows[i][1], where)).second)
        fail(ErrorKind::Schema, where + ": duplicate exam grade");
    }
  }
  return r;
}

template <typename T>
T json_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorKind::Schema, where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::Schema, where + ": field '" + key + "' has the wrong type");
  }
}

inline const nlohmann::json& json_array(const nlohmann::json& doc, const char* key, bool required) {
  static const nlohmann::json empty = nlohmann::json::array();
  if (!doc.contains(key)) {
    if (required) fail(ErrorKind::Schema, std::string("missing array '") + key + "'");
    return empty;
  }
  if (!doc.at(key).is_array()) fail(ErrorKind::Schema, std::string("'") + key + "' must be an array");
  return doc.at(key);
}

inline DatasetRecords load_json_records(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Schema, path + ": " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::Schema, path + ": top level must be an object");

  DatasetRecords r;
  std::size_t i = 0;
  for (const auto& e : json_array(doc, "exercises", true)) {
    const auto where = "exercises[" + std::to_string(i++) + "]";
    r.exercises.push_back({json_field<std::string>(e, "exercise", where), json_field<double>(e, "max_points", where)});
  }
  i = 0;
  for (const auto& g : json_array(doc, "groups", true)) {
    const auto where = "groups[" + std::to_string(i++) + "]";
    if (!r.groups[json_field<std::string>(g, "submission", where)].insert(json_field<std::string>(g, "grader", where)).second)
      fail(ErrorKind::Schema, where + ": duplicate membership");
  }
  i = 0;
  for (const auto& g : json_array(doc, "grades", true)) {
    const auto where = "grades[" + std::to_string(i++) + "]";
    r.grades.push_back({json_field<std::string>(g, "exercise", where), json_field<std::string>(g, "submission", where),
                        json_field<std::string>(g, "grader", where),
                        require_role(json_field<std::string>(g, "role", where), where),
                        json_field<double>(g, "value", where)});
  }
  i = 0;
  BallotAssembler assembler;
  for (const auto& b : json_array(doc, "ballots", false)) {
    const auto where = "ballots[" + std::to_string(i++) + "]";
    assembler.add(json_field<std::string>(b, "exercise", where), json_field<std::string>(b, "grader", where),
                  json_field<long long>(b, "position", where), json_field<std::string>(b, "submission", where), where);
  }
  r.ballots = assembler.finish();
  i = 0;
  for (const auto& x : json_array(doc, "exams", false)) {
    const auto where = "exams[" + std::to_string(i++) + "]";
    if (!r.exams.emplace(json_field<std::string>(x, "grader", where), json_field<double>(x, "exam_grade", where)).second)
      fail(ErrorKind::Schema, where + ": duplicate exam grade");
  }
  return r;
}

struct BallotRow {
  std::string exercise, grader, position, submission;
};

inline std::vector<BallotRow> ballot_rows(const Dataset& d) {
  std::vector<BallotRow> rows;
  for (const auto& b : d.ballots())
    for (std::size_t p = 0; p < b.ranking.size(); ++p)
      for (const auto& s : b.ranking[p]) rows.push_back({b.exercise, b.grader, std::to_string(p), s});
  return rows;
}

}  // namespace detail

/// Loads and validates a dataset. `path` is a directory for CSV and a file for JSON.
inline Dataset load_dataset(const std::string& path, FileFormat format, const ValidationOptions& options = {}) {
  DatasetRecords r = format == FileFormat::Csv ? detail::load_csv_records(path) : detail::load_json_records(path);
  return Dataset::create(std::move(r), options);
}

inline void save_dataset(const Dataset& d, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory '" + path + "'");
    const std::filesystem::path dir(path);
    {
      std::ostringstream os;
      csv::write_row(os, {"exercise", "max_points"});
      for (const auto& e : d.exercises()) csv::write_row(os, {e.id, csv::format_number(e.max_points)});
      csv::write_file((dir / "exercises.csv").string(), os.str());
    }
    {
      std::ostringstream os;
      csv::write_row(os, {"submission", "grader"});
      for (const auto& [s, members] : d.groups())
        for (const auto& g : members) csv::write_row(os, {s, g});
      csv::write_file((dir / "groups.csv").string(), os.str());
    }
    {
      std::ostringstream os;
      csv::write_row(os, {"exercise", "submission", "grader", "role", "value"});
      for (const auto& g : d.grades())
        csv::write_row(os, {g.exercise, g.submission, g.grader, std::string(to_string(g.role)),
                            csv::format_number(g.value)});
      csv::write_file((dir / "grades.csv").string(), os.str());
    }
    {
      std::ostringstream os;
      csv::write_row(os, {"exercise", "grader", "position", "submission"});
      for (const auto& row : detail::ballot_rows(d))
        csv::write_row(os, {row.exercise, row.grader, row.position, row.submission});
      csv::write_file((dir / "ballots.csv").string(), os.str());
    }
    {
      std::ostringstream os;
      csv::write_row(os, {"grader", "exam_grade"});
      for (const auto& [g, v] : d.exams()) csv::write_row(os, {g, csv::format_number(v)});
      csv::write_file((dir / "exams.csv").string(), os.str());
    }
    return;
  }

  using nlohmann::json;
  json doc = json::object();
  doc["exercises"] = json::array();
  for (const auto& e : d.exercises()) doc["exercises"].push_back({{"exercise", e.id}, {"max_points", e.max_points}});
  doc["groups"] = json::array();
  for (const auto& [s, members] : d.groups())
    for (const auto& g : members) doc["groups"].push_back({{"submission", s}, {"grader", g}});
  doc["grades"] = json::array();
  for (const auto& g : d.grades())
    doc["grades"].push_back({{"exercise", g.exercise},
                             {"submission", g.submission},
                             {"grader", g.grader},
                             {"role", std::string(to_string(g.role))},
                             {"value", g.value}});
  doc["ballots"] = json::array();
  for (const auto& row : detail::ballot_rows(d))
    doc["ballots"].push_back({{"exercise", row.exercise},
                              {"grader", row.grader},
                              {"position", std::stoll(row.position)},
                              {"submission", row.submission}});
  doc["exams"] = json::array();
  for (const auto& [g, v] : d.exams()) doc["exams"].push_back({{"grader", g}, {"exam_grade", v}});
  csv::write_file(path, doc.dump(2) + "\n");
}

/// truth.csv: exercise,submission,true_score
inline void save_truth(const TruthSet& t, const std::string& path) {
  std::ostringstream os;
  csv::write_row(os, {"exercise", "submission", "true_score"});
  for (const auto& [k, v] : t.scores) csv::write_row(os, {k.exercise, k.submission, csv::format_number(v)});
  csv::write_file(path, os.str());
}

inline TruthSet load_truth(const std::string& path, TruthProvenance provenance = TruthProvenance::Synthetic) {
  auto table = csv::read_table(path, {"exercise", "submission", "true_score"});
  TruthSet t;
  t.provenance = provenance;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = detail::row_ref(path, table.lines[i]);
    const auto& row = table.rows[i];
    if (!t.scores.emplace(SubmissionKey{row[0], row[1]}, detail::require_number(row[2], where)).second)
      fail(ErrorKind::Schema, where + ": duplicate truth row");
  }
  return t;
}

}  // namespace peergrade
