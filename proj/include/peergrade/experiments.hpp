#pragma once

// Replicated experiment protocols. Every (replicate, k) cell is an
// independent task with its own seed, so a report is the same for any
// number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "peergrade/cardinal.hpp"
#include "peergrade/csv.hpp"
#include "peergrade/metrics.hpp"
#include "peergrade/ordinal.hpp"
#include "peergrade/supervised.hpp"
#include "peergrade/synth.hpp"

namespace peergrade {

enum class Protocol { Fig1Left, Fig1Right, Fig2Left, Fig2Right, NoisyTruth, RealData };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::Fig1Left: return "fig1-left";
    case Protocol::Fig1Right: return "fig1-right";
    case Protocol::Fig2Left: return "fig2-left";
    case Protocol::Fig2Right: return "fig2-right";
    case Protocol::NoisyTruth: return "noisy-truth";
    case Protocol::RealData: return "real-data";
  }
  return "?";
}

inline std::optional<Protocol> parse_protocol(std::string_view s) {
  for (Protocol p : {Protocol::Fig1Left, Protocol::Fig1Right, Protocol::Fig2Left, Protocol::Fig2Right,
                     Protocol::NoisyTruth, Protocol::RealData})
    if (s == to_string(p)) return p;
  return std::nullopt;
}

struct ExperimentSpec {
  Protocol protocol = Protocol::Fig1Left;
  std::size_t replicates = 100;
  std::vector<std::size_t> k_values;
  /// Empty means the protocol's default estimator set.
  std::vector<std::string> estimators;
  std::uint64_t base_seed = 0;
  /// Generator keys (as in config.json) overriding the protocol defaults.
  nlohmann::json generator_overrides = nlohmann::json::object();
  Hyperparams hyper;
  EmConfig em;
  SgdConfig sgd;
  ReliabilityPrior rel_prior;
  /// Prior on ordinal latents, on the latent scale where reliability 1 sets the
  /// link's unit; latents are mapped to grade scale afterwards where needed.
  ScorePrior ordinal_prior{0.0, 1.0};
  /// Noisy-truth protocol: evaluation noise and the panel it perturbs.
  double noise_sd = 0.05;
  Protocol noisy_base = Protocol::Fig1Left;
  /// Real-data protocol.
  double train_fraction = 0.5;
  double ta_reliability = 1000.0;
  std::size_t jobs = 1;
};

struct ReportRecord {
  std::string protocol;
  std::size_t replicate = 0;
  std::size_t k = 0;
  std::string estimator;
  std::string reliability_mode;
  std::string role_group;
  std::string metric;
  ExerciseId exercise;
  double value = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRecord> records;
  nlohmann::json meta;
  std::vector<std::string> warnings;
};

inline const std::vector<std::string>& report_header() {
  static const std::vector<std::string> h{"protocol", "replicate", "k",      "estimator", "reliability_mode",
                                          "role_group", "metric",  "exercise", "value"};
  return h;
}

inline std::string report_csv(const ExperimentReport& report) {
  std::ostringstream os;
  csv::write_row(os, report_header());
  for (const auto& r : report.records)
    csv::write_row(os, {r.protocol, std::to_string(r.replicate), std::to_string(r.k), r.estimator, r.reliability_mode,
                        r.role_group, r.metric, r.exercise, csv::format_number(r.value)});
  return os.str();
}

inline std::vector<ReportRecord> parse_report_csv(const std::string& text) {
  const auto table = csv::parse(text, "report.csv");
  if (table.header != report_header()) fail(ErrorKind::Schema, "report.csv: unexpected header");
  std::vector<ReportRecord> out;
  for (const auto& row : table.rows) {
    auto rep = csv::parse_integer(row[1]);
    auto k = csv::parse_integer(row[2]);
    auto v = csv::parse_number(row[8]);
    if (!rep || !k || !v) fail(ErrorKind::Schema, "report.csv: malformed numeric field");
    out.push_back({row[0], static_cast<std::size_t>(*rep), static_cast<std::size_t>(*k), row[3], row[4], row[5], row[6],
                   row[7], *v});
  }
  return out;
}

/// Applies config.json-style keys onto a generator config.
inline void apply_overrides(GeneratorConfig& c, const nlohmann::json& j) {
  if (j.is_null()) return;
  if (!j.is_object()) fail(ErrorKind::Schema, "generator overrides must be an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "n_submissions") c.n_submissions = v.get<std::size_t>();
      else if (key == "n_graders") c.n_graders = v.get<std::size_t>();
      else if (key == "n_exercises") c.n_exercises = v.get<std::size_t>();
      else if (key == "grades_per_submission") c.grades_per_submission = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "truth_model") {
        const auto s = v.get<std::string>();
        if (s != "normal" && s != "weibull") fail(ErrorKind::Schema, "truth_model must be normal or weibull");
        c.truth_model = s == "normal" ? TruthModel::Normal : TruthModel::Weibull;
      } else if (key == "truth_mean") c.truth_mean = v.get<double>();
      else if (key == "truth_sd") c.truth_sd = v.get<double>();
      else if (key == "weibull_shape") c.weibull_shape = v.get<double>();
      else if (key == "weibull_scale") c.weibull_scale = v.get<double>();
      else if (key == "bias_sd") c.bias_sd = v.get<double>();
      else if (key == "reliability_shape") c.reliability_shape = v.get<double>();
      else if (key == "reliability_rate") c.reliability_rate = v.get<double>();
      else if (key == "fixed_reliability") c.fixed_reliability = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (key == "n_random_graders") c.n_random_graders = v.get<std::size_t>();
      else if (key == "clip_to_unit") c.clip_to_unit = v.get<bool>();
      else if (key == "redraw_per_exercise") c.redraw_per_exercise = v.get<bool>();
      else if (key == "self_grades") c.self_grades = v.get<bool>();
      else if (key == "n_tas") c.n_tas = v.get<std::size_t>();
      else if (key == "ta_noise_sd") c.ta_noise_sd = v.get<double>();
      else if (key == "exam_model") {
        const auto s = v.get<std::string>();
        if (s == "none") c.exam_model = ExamModel::None;
        else if (s == "proportional_to_reliability") c.exam_model = ExamModel::ProportionalToReliability;
        else fail(ErrorKind::Schema, "unknown exam_model '" + s + "'");
      } else if (key == "exam_scale") c.exam_scale = v.get<double>();
      else fail(ErrorKind::Schema, "unknown generator key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Schema, "generator key '" + key + "' has the wrong type");
    }
  }
}

/// Runs task(i) for i in [0, n) on up to `jobs` threads; results land in
/// their own slot so order never depends on scheduling.
template <typename Result, typename Task>
std::vector<Result> run_tasks(std::size_t n, std::size_t jobs, Task task) {
  std::vector<Result> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

/// Seed of the dataset for replicate r at grades-per-submission k.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t replicate, std::size_t k) {
  return replicate_seed(base, (static_cast<std::uint64_t>(replicate) << 20) | static_cast<std::uint64_t>(k));
}

namespace detail {

inline void append_errors(std::vector<ReportRecord>& out, const ReportRecord& proto,
                          const std::map<SubmissionKey, double>& scores, const TruthSet& truth,
                          const std::vector<Metric>& metrics, std::vector<std::string>* warnings = nullptr) {
  for (Metric m : metrics) {
    auto errs = per_exercise_errors(scores, truth, m);
    if (warnings)
      for (auto& w : errs.warnings) warnings->push_back(proto.estimator + ": " + w);
    for (const auto& [e, v] : errs.errors) {
      ReportRecord r = proto;
      r.metric = std::string(to_string(m));
      r.exercise = e;
      r.value = v;
      out.push_back(std::move(r));
    }
  }
}

inline GeneratorConfig protocol_config(Protocol p, std::size_t k, std::uint64_t seed, const nlohmann::json& overrides) {
  GeneratorConfig c;
  switch (p) {
    case Protocol::Fig1Left:
    case Protocol::Fig2Left: c = fig1_left_config(k, seed); break;
    case Protocol::Fig1Right:
    case Protocol::Fig2Right: c = fig1_right_config(k, seed); break;
    default: fail(ErrorKind::Precondition, "protocol has no generator");
  }
  if (p == Protocol::Fig2Left || p == Protocol::Fig2Right) c.n_exercises = 1;
  apply_overrides(c, overrides);
  c.grades_per_submission = k;
  c.seed = seed;
  return c;
}

inline std::map<ExerciseId, ScorePrior> grade_priors(const Dataset& d, const RoleSet& roles) {
  std::map<ExerciseId, std::vector<double>> values;
  for (const auto& g : d.grades())
    if (roles.count(g.role)) values[g.exercise].push_back(g.value);
  std::map<ExerciseId, ScorePrior> out;
  for (const auto& [e, v] : values) {
    auto [mu, var] = GaussianModel::score_prior(v);
    out[e] = {mu, var};
  }
  return out;
}

inline const std::set<std::string>& cardinal_estimators() {
  static const std::set<std::string> s{"mean", "median", "ust", "umt"};
  return s;
}
inline const std::set<std::string>& ordinal_estimators() {
  static const std::set<std::string> s{"borda", "bt", "thurstone", "pl"};
  return s;
}

inline std::map<SubmissionKey, double> fit_cardinal(const std::string& name, const Dataset& d, const ExperimentSpec& spec,
                                                    const RoleSet& roles) {
  if (name == "mean") return mean_estimate(d, roles).scores;
  if (name == "median") return median_estimate(d, roles).scores;
  if (name == "ust") return ust_fit_all(d, spec.hyper, spec.em, roles).scores;
  if (name == "umt") return umt_fit(d, spec.hyper, spec.em, roles).scores;
  fail(ErrorKind::Precondition, "unknown cardinal estimator '" + name + "'");
}

inline OrdinalFit fit_ordinal(const std::string& name, const std::vector<OrdinalBallot>& ballots,
                              const ExperimentSpec& spec, std::uint64_t seed, bool reliability) {
  if (name == "borda") return borda(ballots);
  SgdConfig sgd = spec.sgd;
  sgd.seed = seed;
  const auto& prior = spec.ordinal_prior;
  if (name == "bt") return bt_fit(ballots, prior, spec.rel_prior, sgd, reliability);
  if (name == "thurstone") return thurstone_fit(ballots, prior, spec.rel_prior, sgd, reliability);
  if (name == "pl") return pl_fit(ballots, prior, sgd, reliability, spec.rel_prior);
  fail(ErrorKind::Precondition, "unknown ordinal estimator '" + name + "'");
}

inline void check_estimators(const std::vector<std::string>& names, const std::set<std::string>& allowed) {
  for (const auto& n : names)
    if (!allowed.count(n)) fail(ErrorKind::Precondition, "estimator '" + n + "' is not available in this protocol");
}

inline nlohmann::json spec_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["protocol"] = std::string(to_string(s.protocol));
  j["replicates"] = s.replicates;
  j["k_values"] = s.k_values;
  j["estimators"] = s.estimators;
  j["base_seed"] = s.base_seed;
  j["generator_overrides"] = s.generator_overrides;
  j["hyperparameters"] = to_json(s.hyper);
  j["em"] = {{"tolerance", s.em.tolerance}, {"max_iterations", s.em.max_iterations},
             {"reliability_floor", s.em.reliability_floor}};
  j["sgd"] = {{"step", s.sgd.step}, {"epochs", s.sgd.epochs}};
  j["reliability_prior"] = {{"alpha", s.rel_prior.alpha}, {"beta", s.rel_prior.beta}};
  j["ordinal_prior"] = {{"mean", s.ordinal_prior.mean}, {"variance", s.ordinal_prior.variance}};
  j["noise_sd"] = s.noise_sd;
  j["noisy_base"] = std::string(to_string(s.noisy_base));
  j["train_fraction"] = s.train_fraction;
  j["ta_reliability"] = s.ta_reliability;
  return j;
}

inline std::vector<std::size_t> k_grid(const ExperimentSpec& spec, std::vector<std::size_t> fallback) {
  auto ks = spec.k_values.empty() ? std::move(fallback) : spec.k_values;
  for (auto k : ks)
    if (k == 0) fail(ErrorKind::Precondition, "k values must be positive");
  return ks;
}

inline ExperimentReport assemble(const ExperimentSpec& spec, std::vector<std::vector<ReportRecord>> parts,
                                 const std::vector<std::size_t>& ks, const std::vector<std::string>& estimators) {
  ExperimentReport report;
  for (auto& p : parts)
    for (auto& r : p) report.records.push_back(std::move(r));
  ExperimentSpec echo = spec;
  echo.k_values = ks;
  echo.estimators = estimators;
  report.meta = spec_json(echo);
  report.meta["seed"] = spec.base_seed;
  return report;
}

}  // namespace detail

/// Cardinal estimators on synthetic data from either fig1 panel; L2 and
/// Kendall-tau per exercise. NoisyTruth runs the same cells but scores
/// against truth perturbed by N(0, noise_sd^2).
inline ExperimentReport run_fig1(const ExperimentSpec& spec) {
  Protocol panel = spec.protocol;
  const bool noisy = spec.protocol == Protocol::NoisyTruth;
  if (noisy) panel = spec.noisy_base;
  if (panel != Protocol::Fig1Left && panel != Protocol::Fig1Right)
    fail(ErrorKind::Precondition, "run_fig1 needs a fig1 protocol");
  if (spec.replicates == 0) fail(ErrorKind::Precondition, "replicates must be at least 1");
  const auto ks = detail::k_grid(spec, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto estimators = spec.estimators.empty() ? std::vector<std::string>{"mean", "median", "ust", "umt"} : spec.estimators;
  detail::check_estimators(estimators, detail::cardinal_estimators());

  // Validate every cell's configuration up front so infeasible k fails fast.
  for (auto k : ks) {
    auto c = detail::protocol_config(panel, k, 0, spec.generator_overrides);
    validate(c);
    const std::size_t max_team = (c.n_graders + c.n_submissions - 1) / c.n_submissions;
    if (k > c.n_graders - std::min(max_team, c.n_graders))
      fail(ErrorKind::InfeasibleAssignment, "k = " + std::to_string(k) + " exceeds the available non-member graders");
  }

  const std::string protocol(to_string(spec.protocol));
  const RoleSet peer{GradeRole::Peer};
  auto parts = run_tasks<std::vector<ReportRecord>>(spec.replicates * ks.size(), spec.jobs, [&](std::size_t task) {
    const std::size_t rep = task / ks.size();
    const std::size_t k = ks[task % ks.size()];
    const auto seed = cell_seed(spec.base_seed, rep, k);
    const auto data = generate(detail::protocol_config(panel, k, seed, spec.generator_overrides));
    const TruthSet truth = noisy ? perturb_truth(data.truth, spec.noise_sd, splitmix64(seed ^ 0x6e6f697379ULL)) : data.truth;
    std::vector<ReportRecord> out;
    for (const auto& est : estimators) {
      const auto scores = detail::fit_cardinal(est, data.dataset, spec, peer);
      detail::append_errors(out, {protocol, rep, k, est, "none", "peer", "", "", 0.0}, scores, truth,
                            {Metric::L2, Metric::Kendall});
    }
    return out;
  });
  return detail::assemble(spec, std::move(parts), ks, estimators);
}

inline ExperimentReport run_noisy_truth(const ExperimentSpec& spec) {
  ExperimentSpec s = spec;
  s.protocol = Protocol::NoisyTruth;
  return run_fig1(s);
}

/// Ordinal estimators on rankings induced from synthetic peer grades, with
/// and without reliability estimation, against the cardinal Mean on the
/// underlying grades; Kendall-tau per exercise.
inline ExperimentReport run_fig2(const ExperimentSpec& spec) {
  if (spec.protocol != Protocol::Fig2Left && spec.protocol != Protocol::Fig2Right)
    fail(ErrorKind::Precondition, "run_fig2 needs a fig2 protocol");
  if (spec.replicates == 0) fail(ErrorKind::Precondition, "replicates must be at least 1");
  const auto ks = detail::k_grid(spec, {6});
  const auto estimators =
      spec.estimators.empty() ? std::vector<std::string>{"mean", "borda", "bt", "thurstone", "pl"} : spec.estimators;
  std::set<std::string> allowed = detail::ordinal_estimators();
  allowed.insert("mean");
  allowed.insert("median");
  detail::check_estimators(estimators, allowed);
  for (auto k : ks) validate(detail::protocol_config(spec.protocol, k, 0, spec.generator_overrides));

  const std::string protocol(to_string(spec.protocol));
  const RoleSet peer{GradeRole::Peer};
  auto parts = run_tasks<std::vector<ReportRecord>>(spec.replicates * ks.size(), spec.jobs, [&](std::size_t task) {
    const std::size_t rep = task / ks.size();
    const std::size_t k = ks[task % ks.size()];
    const auto seed = cell_seed(spec.base_seed, rep, k);
    const auto data = generate(detail::protocol_config(spec.protocol, k, seed, spec.generator_overrides));
    const auto ballots = induce_ballots(data.dataset, peer);
    std::vector<ReportRecord> out;
    for (const auto& est : estimators) {
      if (detail::cardinal_estimators().count(est)) {
        const auto scores = detail::fit_cardinal(est, data.dataset, spec, peer);
        detail::append_errors(out, {protocol, rep, k, est, "none", "peer", "", "", 0.0}, scores, data.truth,
                              {Metric::Kendall});
        continue;
      }
      if (est == "borda") {
        detail::append_errors(out, {protocol, rep, k, est, "none", "peer", "", "", 0.0}, borda(ballots).latent,
                              data.truth, {Metric::Kendall});
        continue;
      }
      for (bool rel : {false, true}) {
        const auto fit = detail::fit_ordinal(est, ballots, spec, splitmix64(seed), rel);
        detail::append_errors(out, {protocol, rep, k, est, rel ? "on" : "off", "peer", "", "", 0.0}, fit.latent,
                              data.truth, {Metric::Kendall});
      }
    }
    return out;
  });
  return detail::assemble(spec, std::move(parts), ks, estimators);
}

/// Per-exercise errors against (TA) truth for every role group and
/// estimator. Supervised estimators are scored on the test split only.
inline ExperimentReport run_real_eval(const Dataset& d, const TruthSet& truth, const ExperimentSpec& spec) {
  if (spec.replicates == 0) fail(ErrorKind::Precondition, "replicates must be at least 1");
  if (truth.scores.empty()) fail(ErrorKind::MissingTruth, "real-data evaluation needs truth");
  for (const auto& [s, e] : d.submission_exercise())
    if (!truth.find({e, s})) fail(ErrorKind::MissingTruth, "submission '" + s + "' has no truth");
  const auto estimators = spec.estimators.empty()
                              ? std::vector<std::string>{"mean", "median", "ust", "umt", "bt", "sn", "smt"}
                              : spec.estimators;
  std::set<std::string> allowed = detail::cardinal_estimators();
  allowed.insert(detail::ordinal_estimators().begin(), detail::ordinal_estimators().end());
  allowed.insert("sn");
  allowed.insert("smt");
  detail::check_estimators(estimators, allowed);

  const std::vector<RoleSet> groups{{GradeRole::Self}, {GradeRole::Peer}, {GradeRole::Self, GradeRole::Peer}};
  std::set<SubmissionKey> keys;
  for (const auto& [s, e] : d.submission_exercise()) keys.insert({e, s});

  std::vector<std::string> warnings;
  std::mutex warn_mutex;
  const std::string protocol(to_string(Protocol::RealData));
  auto parts = run_tasks<std::vector<ReportRecord>>(spec.replicates * groups.size(), spec.jobs, [&](std::size_t task) {
    const std::size_t rep = task / groups.size();
    const RoleSet& roles = groups[task % groups.size()];
    const std::string group = to_string(roles);
    const auto seed = replicate_seed(spec.base_seed, rep);
    std::vector<ReportRecord> out;
    std::vector<std::string> local_warnings;

    // Submissions without any grade of this role group cannot be estimated.
    std::set<SubmissionKey> graded;
    for (const auto& g : d.grades())
      if (roles.count(g.role)) graded.insert({g.exercise, g.submission});
    if (graded.empty()) return out;
    const TrainTestSplit split = make_split(graded, spec.train_fraction, seed);

    for (const auto& est : estimators) {
      const ReportRecord proto{protocol, rep, 0, est, "none", group, "", "", 0.0};
      if (detail::cardinal_estimators().count(est)) {
        if ((est == "mean" || est == "median") && graded.size() != keys.size()) {
          local_warnings.push_back(group + "/" + est + ": some submissions have no grade; skipped");
          continue;
        }
        detail::append_errors(out, proto, detail::fit_cardinal(est, d, spec, roles), truth, {Metric::L2, Metric::Kendall},
                              &local_warnings);
      } else if (detail::ordinal_estimators().count(est)) {
        const auto ballots = induce_ballots(d, roles);
        if (ballots.empty()) {
          local_warnings.push_back(group + "/" + est + ": grades induce no rankings; skipped");
          continue;
        }
        const auto priors = detail::grade_priors(d, roles);
        const auto fit = detail::fit_ordinal(est, ballots, spec, splitmix64(seed), false);
        std::map<SubmissionKey, double> scores;
        for (const auto& [e, p] : priors) {
          std::map<SubmissionKey, double> ex_latent;
          for (const auto& [k, v] : fit.latent)
            if (k.exercise == e) ex_latent[k] = v;
          const auto mapped = latent_to_scores(ex_latent, p.mean, p.variance, false);
          scores.insert(mapped.begin(), mapped.end());
        }
        ReportRecord r = proto;
        r.reliability_mode = est == "borda" ? "none" : "off";
        detail::append_errors(out, r, scores, truth, {Metric::L2, Metric::Kendall}, &local_warnings);
      } else {
        std::map<SubmissionKey, double> scores;
        if (est == "sn") {
          scores = sn_estimate(d, truth, split, roles).scores;
        } else {
          const auto fit = smt_fit(d, truth, split.train, spec.hyper, spec.ta_reliability, spec.em, roles);
          for (const auto& k : split.test)
            if (auto it = fit.scores.find(k); it != fit.scores.end()) scores[k] = it->second;
        }
        detail::append_errors(out, proto, scores, truth, {Metric::L2, Metric::Kendall}, &local_warnings);
      }
    }
    std::lock_guard lock(warn_mutex);
    for (auto& w : local_warnings) warnings.push_back(w);
    return out;
  });
  auto report = detail::assemble(spec, std::move(parts), {}, estimators);
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  report.warnings = warnings;
  return report;
}

enum class DifficultyBand { Easy, Difficult };

/// Easy: exercises whose error has empirical CDF <= q (the lowest q share).
/// Difficult: exercises whose share of errors at or above them is <= 1 - q.
inline std::set<ExerciseId> filter_exercises(const std::map<ExerciseId, double>& errors, DifficultyBand band,
                                             double quantile) {
  if (quantile < 0.0 || quantile > 1.0) fail(ErrorKind::Precondition, "quantile must lie in [0, 1]");
  std::set<ExerciseId> out;
  const auto n = static_cast<double>(errors.size());
  for (const auto& [e, v] : errors) {
    double at_or_below = 0.0, at_or_above = 0.0;
    for (const auto& [e2, w] : errors) {
      if (w <= v) at_or_below += 1.0;
      if (w >= v) at_or_above += 1.0;
    }
    const bool keep = band == DifficultyBand::Easy ? at_or_below / n <= quantile : at_or_above / n <= 1.0 - quantile;
    if (keep) out.insert(e);
  }
  return out;
}

/// Bands exercises by the Mean baseline's L2 error against truth.
inline std::set<ExerciseId> filter_exercises(const Dataset& d, const TruthSet& truth, DifficultyBand band,
                                             double quantile, const RoleSet& roles = {GradeRole::Peer}) {
  const auto errs = per_exercise_errors(mean_estimate(d, roles).scores, truth, Metric::L2);
  return filter_exercises(errs.errors, band, quantile);
}

/// Bands exercises by the report's Mean L2 records, averaged over replicates.
inline std::set<ExerciseId> filter_exercises(const ExperimentReport& report, DifficultyBand band, double quantile) {
  std::map<ExerciseId, std::pair<double, double>> acc;
  for (const auto& r : report.records)
    if (r.estimator == "mean" && r.metric == "l2") {
      acc[r.exercise].first += r.value;
      acc[r.exercise].second += 1.0;
    }
  if (acc.empty()) fail(ErrorKind::InsufficientData, "report has no Mean L2 records");
  std::map<ExerciseId, double> errors;
  for (const auto& [e, v] : acc) errors[e] = v.first / v.second;
  return filter_exercises(errors, band, quantile);
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  switch (spec.protocol) {
    case Protocol::Fig1Left:
    case Protocol::Fig1Right:
    case Protocol::NoisyTruth: return run_fig1(spec);
    case Protocol::Fig2Left:
    case Protocol::Fig2Right: return run_fig2(spec);
    case Protocol::RealData: fail(ErrorKind::Precondition, "real-data evaluation needs a dataset; use run_real_eval");
  }
  fail(ErrorKind::Precondition, "unknown protocol");
}

}  // namespace peergrade
