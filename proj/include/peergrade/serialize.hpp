#pragma once

// fit.json and analysis.{csv,json}. Cardinal and ordinal fits share one
// shape; ordinal latents go in the score slots.

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "peergrade/cardinal.hpp"
#include "peergrade/csv.hpp"
#include "peergrade/ordinal.hpp"
#include "peergrade/supervised.hpp"

namespace peergrade {

struct GraderParams {
  std::optional<double> bias;
  std::optional<double> reliability;
};

struct FitRecord {
  std::string model;
  std::map<SubmissionKey, double> scores;
  std::map<GraderId, GraderParams> graders;
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = true;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> warnings;
};

inline FitRecord to_record(const std::string& model, const ModelFit& fit, nlohmann::json config = nlohmann::json::object()) {
  FitRecord r{model, fit.scores, {}, fit.objective_trace, fit.iterations, fit.converged, std::move(config), fit.warnings};
  for (const auto& [g, b] : fit.bias) r.graders[g].bias = b;
  for (const auto& [g, v] : fit.reliability) r.graders[g].reliability = v;
  return r;
}

inline FitRecord to_record(const std::string& model, const OrdinalFit& fit, nlohmann::json config = nlohmann::json::object()) {
  FitRecord r{model, fit.latent, {}, fit.objective_trace, fit.epochs, fit.converged, std::move(config), fit.warnings};
  for (const auto& [g, v] : fit.reliability) r.graders[g].reliability = v;
  return r;
}

inline nlohmann::json to_json(const FitRecord& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["scores"] = nlohmann::json::array();
  for (const auto& [k, v] : r.scores) j["scores"].push_back({{"exercise", k.exercise}, {"submission", k.submission}, {"score", v}});
  j["graders"] = nlohmann::json::array();
  for (const auto& [g, p] : r.graders) {
    nlohmann::json row{{"grader", g}};
    row["bias"] = p.bias ? nlohmann::json(*p.bias) : nlohmann::json(nullptr);
    row["reliability"] = p.reliability ? nlohmann::json(*p.reliability) : nlohmann::json(nullptr);
    j["graders"].push_back(std::move(row));
  }
  j["objective_trace"] = r.objective_trace;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["config"] = r.config;
  j["warnings"] = r.warnings;
  return j;
}

inline FitRecord fit_from_json(const nlohmann::json& j) {
  FitRecord r;
  try {
    r.model = j.at("model").get<std::string>();
    for (const auto& s : j.at("scores"))
      r.scores[{s.at("exercise").get<std::string>(), s.at("submission").get<std::string>()}] = s.at("score").get<double>();
    if (j.contains("graders"))
      for (const auto& g : j.at("graders")) {
        GraderParams p;
        if (g.contains("bias") && !g["bias"].is_null()) p.bias = g["bias"].get<double>();
        if (g.contains("reliability") && !g["reliability"].is_null()) p.reliability = g["reliability"].get<double>();
        r.graders[g.at("grader").get<std::string>()] = p;
      }
    if (j.contains("objective_trace")) r.objective_trace = j["objective_trace"].get<std::vector<double>>();
    if (j.contains("iterations")) r.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("converged")) r.converged = j["converged"].get<bool>();
    if (j.contains("config")) r.config = j["config"];
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("fit.json: ") + e.what());
  }
  return r;
}

inline FitRecord load_fit(const std::string& path) {
  const auto text = csv::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, path + ": " + e.what());
  }
  return fit_from_json(j);
}

/// analysis.json: {"graders": [...], "skipped": [...], "correlations": [...], "notes": [...]}.
/// Correlations whose inputs are unavailable are left out.
inline nlohmann::json analysis_json(const DiagnosticsReport& diag, const std::optional<CorrelationReport>& corr) {
  nlohmann::json j;
  j["graders"] = nlohmann::json::array();
  for (const auto& [g, d] : diag.graders)
    j["graders"].push_back({{"grader", g},
                            {"mean_given_grade", d.mean_given_grade},
                            {"peer_relative_bias", d.peer_relative_bias},
                            {"peer_relative_variance", d.peer_relative_variance},
                            {"support", d.support}});
  j["skipped"] = nlohmann::json::array();
  for (const auto& [g, why] : diag.skipped) j["skipped"].push_back({{"grader", g}, {"reason", why}});
  j["correlations"] = nlohmann::json::array();
  j["notes"] = nlohmann::json::array();
  if (corr) {
    const std::pair<const char*, const std::optional<double>*> named[] = {
        {"r_homework_bias", &corr->r_homework_bias},     {"r_homework_deviation", &corr->r_homework_deviation},
        {"r_exam_homework", &corr->r_exam_homework},     {"r_exam_bias", &corr->r_exam_bias},
        {"r_exam_deviation", &corr->r_exam_deviation}};
    for (const auto& [name, value] : named) {
      if (!*value) continue;
      nlohmann::json row{{"coefficient", name}, {"r", **value}};
      if (auto it = corr->sample_sizes.find(name); it != corr->sample_sizes.end()) row["n"] = it->second;
      j["correlations"].push_back(std::move(row));
    }
    j["notes"] = corr->notes;
  }
  return j;
}

/// analysis.csv: kind,name,statistic,value,support with one row per grader statistic
/// or coefficient.
inline std::string analysis_csv(const DiagnosticsReport& diag, const std::optional<CorrelationReport>& corr) {
  std::ostringstream os;
  csv::write_row(os, {"kind", "name", "statistic", "value", "support"});
  for (const auto& [g, d] : diag.graders) {
    const auto n = std::to_string(d.support);
    csv::write_row(os, {"grader", g, "mean_given_grade", csv::format_number(d.mean_given_grade), n});
    csv::write_row(os, {"grader", g, "peer_relative_bias", csv::format_number(d.peer_relative_bias), n});
    csv::write_row(os, {"grader", g, "peer_relative_variance", csv::format_number(d.peer_relative_variance), n});
  }
  if (corr) {
    const auto j = analysis_json({}, corr);
    for (const auto& row : j["correlations"])
      csv::write_row(os, {"correlation", row["coefficient"].get<std::string>(), "pearson_r",
                          csv::format_number(row["r"].get<double>()),
                          row.contains("n") ? std::to_string(row["n"].get<std::size_t>()) : ""});
  }
  return os.str();
}

}  // namespace peergrade
