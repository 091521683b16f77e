// peergrade: generate | fit | evaluate | experiment | analyze
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "peergrade/experiments.hpp"
#include "peergrade/io.hpp"
#include "peergrade/serialize.hpp"

namespace fs = std::filesystem;
using namespace peergrade;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

FileFormat detect_format(const std::string& path) {
  return fs::is_directory(path) ? FileFormat::Csv : FileFormat::Json;
}

Dataset load(const std::string& path, std::size_t max_group) {
  if (!fs::exists(path)) fail(ErrorKind::Io, "no such dataset: " + path);
  return load_dataset(path, detect_format(path), {max_group});
}

RoleSet parse_roles(const std::vector<std::string>& names) {
  RoleSet roles;
  for (const auto& n : names) {
    auto r = parse_role(n);
    if (!r) throw UsageError("unknown role '" + n + "' (expected self, peer or ta)");
    roles.insert(*r);
  }
  if (roles.empty()) throw UsageError("--roles must name at least one role");
  return roles;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir + ": " + ec.message());
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string protocol = "fig1-left";
  std::size_t k = 6;
  std::uint64_t seed = 0;
  std::optional<std::size_t> graders, submissions, exercises;
  std::string generator_file;
  std::string out = ".";
  std::string format = "csv";
};

void cmd_generate(const GenerateArgs& a) {
  GeneratorConfig c;
  if (a.protocol == "fig1-left" || a.protocol == "fig2-left") c = fig1_left_config(a.k, a.seed);
  else if (a.protocol == "fig1-right" || a.protocol == "fig2-right") c = fig1_right_config(a.k, a.seed);
  else c = ad_shaped_config(a.seed);
  if (a.protocol.starts_with("fig2")) c.n_exercises = 1;
  if (!a.generator_file.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(csv::read_file(a.generator_file));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Schema, a.generator_file + ": " + e.what());
    }
    apply_overrides(c, j);
  }
  c.grades_per_submission = a.k;
  c.seed = a.seed;
  if (a.graders) c.n_graders = *a.graders;
  if (a.submissions) c.n_submissions = *a.submissions;
  if (a.exercises) c.n_exercises = *a.exercises;

  const auto data = generate(c);
  ensure_dir(a.out);
  if (a.format == "json") save_dataset(data.dataset, (fs::path(a.out) / "dataset.json").string(), FileFormat::Json);
  else save_dataset(data.dataset, a.out, FileFormat::Csv);
  save_truth(data.truth, (fs::path(a.out) / "truth.csv").string());
  nlohmann::json meta = to_json(c);
  meta["protocol"] = a.protocol;
  csv::write_file((fs::path(a.out) / "config.json").string(), dump(meta));
  std::cout << "generated " << data.dataset.grades().size() << " grades for " << data.dataset.submission_exercise().size()
            << " submissions into " << a.out << "\n";
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string model;
  std::vector<std::string> roles{"peer"};
  std::string hyper_file;
  std::string truth;
  std::string out = "fit.json";
  std::string source = "grades";
  std::optional<std::string> exercise;
  double train_fraction = 0.5;
  double ta_reliability = 1000.0;
  double tolerance = 1e-6;
  std::size_t max_iterations = 500;
  std::size_t epochs = 200;
  double step = 0.05;
  bool reliability = false;
  double prior_mean = 0.0;
  double prior_var = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_group = 3;
};

std::vector<OrdinalBallot> fit_ballots(const Dataset& d, const FitArgs& a, const RoleSet& roles) {
  if (a.source == "ballots") {
    if (d.ballots().empty()) fail(ErrorKind::InsufficientData, "dataset has no ballots");
    return d.ballots();
  }
  auto ballots = induce_ballots(d, roles);
  if (ballots.empty()) {
    if (roles == RoleSet{GradeRole::Self}) fail(ErrorKind::InsufficientData, "self grades induce no rankings");
    fail(ErrorKind::InsufficientData, "the selected grades induce no rankings");
  }
  return ballots;
}

void cmd_fit(const FitArgs& a) {
  const Dataset d = load(a.data, a.max_group);
  const RoleSet roles = parse_roles(a.roles);
  Hyperparams hyper;
  if (!a.hyper_file.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(csv::read_file(a.hyper_file));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Schema, a.hyper_file + ": " + e.what());
    }
    hyper = hyperparams_from_json(j);
  }
  hyper.validate();
  EmConfig em;
  em.tolerance = a.tolerance;
  em.max_iterations = a.max_iterations;
  SgdConfig sgd;
  sgd.epochs = a.epochs;
  sgd.step = a.step;
  sgd.seed = a.seed;

  nlohmann::json config{{"model", a.model}, {"roles", to_string(roles)}, {"data", a.data}};
  FitRecord record;
  const auto& m = a.model;
  if (m == "mean" || m == "median") {
    record = to_record(m, m == "mean" ? mean_estimate(d, roles) : median_estimate(d, roles), config);
  } else if (m == "ust" || m == "umt" || m == "exam-direct" || m == "exam-hybrid") {
    config["hyperparameters"] = to_json(hyper);
    config["em"] = {{"tolerance", em.tolerance}, {"max_iterations", em.max_iterations}};
    ModelFit fit;
    if (m == "ust") fit = a.exercise ? ust_fit(d, *a.exercise, hyper, em, roles) : ust_fit_all(d, hyper, em, roles);
    else if (m == "umt") fit = umt_fit(d, hyper, em, roles);
    else fit = exam_reliability_fit(d, m == "exam-direct" ? ExamMode::Direct : ExamMode::Hybrid, hyper, em, roles);
    record = to_record(m, fit, config);
  } else if (m == "borda" || m == "bt" || m == "thurstone" || m == "pl") {
    const auto ballots = fit_ballots(d, a, roles);
    config["reliability"] = a.reliability;
    config["source"] = a.source;
    if (m == "borda") {
      record = to_record(m, borda(ballots), config);
    } else {
      config["sgd"] = {{"step", sgd.step}, {"epochs", sgd.epochs}, {"seed", sgd.seed}};
      // Latents live on the scale fixed by the link at reliability 1, so the
      // prior is set there rather than on the grade scale.
      if (!(a.prior_var > 0.0)) fail(ErrorKind::Precondition, "--prior-var must be positive");
      const ScorePrior prior{a.prior_mean, a.prior_var};
      config["latent_prior"] = {{"mean", prior.mean}, {"variance", prior.variance}};
      OrdinalFit fit;
      if (m == "bt") fit = bt_fit(ballots, prior, {}, sgd, a.reliability);
      else if (m == "thurstone") fit = thurstone_fit(ballots, prior, {}, sgd, a.reliability);
      else fit = pl_fit(ballots, prior, sgd, a.reliability);
      record = to_record(m, fit, config);
    }
  } else if (m == "sn" || m == "smt") {
    if (a.truth.empty()) fail(ErrorKind::MissingTruth, m + " needs --truth");
    const TruthSet truth = load_truth(a.truth, TruthProvenance::Ta);
    const auto split = make_split(truth, a.train_fraction, a.seed);
    config["train_fraction"] = a.train_fraction;
    config["seed"] = a.seed;
    config["train_size"] = split.train.size();
    if (m == "sn") {
      record = to_record(m, sn_estimate(d, truth, split, roles), config);
    } else {
      config["hyperparameters"] = to_json(hyper);
      config["ta_reliability"] = a.ta_reliability;
      auto fit = smt_fit(d, truth, split.train, hyper, a.ta_reliability, em, roles);
      // Scores are reported only where the truth was held out.
      std::map<SubmissionKey, double> test_scores;
      for (const auto& k : split.test)
        if (auto it = fit.scores.find(k); it != fit.scores.end()) test_scores[k] = it->second;
      fit.scores = std::move(test_scores);
      record = to_record(m, fit, config);
    }
  } else {
    throw UsageError("unknown model '" + m + "'");
  }

  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  csv::write_file(a.out, dump(to_json(record)));
  for (const auto& w : record.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << m << ": " << record.scores.size() << " scores, " << record.iterations << " iterations, "
            << (record.converged ? "converged" : "not converged") << "; wrote " << a.out << "\n";
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string fit;
  std::string truth;
  std::string metric = "both";
  bool per_exercise = false;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs& a) {
  const FitRecord fit = load_fit(a.fit);
  const TruthSet truth = load_truth(a.truth);
  std::vector<Metric> metrics;
  if (a.metric != "kendall") metrics.push_back(Metric::L2);
  if (a.metric != "l2") metrics.push_back(Metric::Kendall);

  std::map<Metric, PerExerciseErrors> errs;
  std::set<ExerciseId> exercises;
  for (Metric m : metrics) {
    errs[m] = per_exercise_errors(fit.scores, truth, m);
    for (const auto& [e, v] : errs[m].errors) exercises.insert(e);
    for (const auto& w : errs[m].warnings) std::cerr << "warning: " << w << "\n";
  }
  std::vector<std::string> header{"exercise"};
  for (Metric m : metrics) header.emplace_back(to_string(m));

  std::ostringstream os;
  csv::write_row(os, header);
  auto cell = [](const std::map<ExerciseId, double>& m, const ExerciseId& e) {
    auto it = m.find(e);
    return it == m.end() ? std::string() : csv::format_number(it->second);
  };
  if (a.per_exercise) {
    for (const auto& e : exercises) {
      std::vector<std::string> row{e};
      for (Metric m : metrics) row.push_back(cell(errs[m].errors, e));
      csv::write_row(os, row);
    }
  } else {
    // Aggregate: mean of the per-exercise errors.
    std::vector<std::string> row{"all"};
    for (Metric m : metrics) {
      const auto& values = errs[m].errors;
      if (values.empty()) {
        row.emplace_back();
        continue;
      }
      double sum = 0.0;
      for (const auto& [e, v] : values) sum += v;
      row.push_back(csv::format_number(sum / static_cast<double>(values.size())));
    }
    csv::write_row(os, row);
  }
  std::cout << os.str();
  if (!a.out.empty()) csv::write_file(a.out, os.str());
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
  std::string protocol;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<std::size_t> k;
  std::vector<std::string> estimators;
  double noise_sd = 0.05;
  std::string noisy_base = "fig1-left";
  std::string generator_file;
  std::string data;
  std::string truth;
  double train_fraction = 0.5;
  std::string out = ".";
};

void cmd_experiment(const ExperimentArgs& a) {
  ExperimentSpec spec;
  spec.protocol = *parse_protocol(a.protocol);
  spec.replicates = a.replicates;
  spec.base_seed = a.seed;
  spec.jobs = std::max<std::size_t>(1, a.jobs);
  spec.k_values = a.k;
  spec.estimators = a.estimators;
  spec.noise_sd = a.noise_sd;
  spec.noisy_base = *parse_protocol(a.noisy_base);
  spec.train_fraction = a.train_fraction;
  if (!a.generator_file.empty()) {
    try {
      spec.generator_overrides = nlohmann::json::parse(csv::read_file(a.generator_file));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Schema, a.generator_file + ": " + e.what());
    }
  }

  ExperimentReport report;
  if (spec.protocol == Protocol::RealData) {
    if (a.data.empty()) throw UsageError("real-data needs --data");
    const Dataset d = load(a.data, 3);
    const TruthSet truth = a.truth.empty() ? truth_from_ta(d) : load_truth(a.truth, TruthProvenance::Ta);
    report = run_real_eval(d, truth, spec);
  } else {
    report = run_experiment(spec);
  }
  ensure_dir(a.out);
  csv::write_file((fs::path(a.out) / "report.csv").string(), report_csv(report));
  csv::write_file((fs::path(a.out) / "report_meta.json").string(), dump(report.meta));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << report.records.size() << " records to " << (fs::path(a.out) / "report.csv").string() << "\n";
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string data;
  std::string truth;
  std::vector<std::string> roles{"peer", "ta"};
  std::string format = "csv";
  std::string out = ".";
};

void cmd_analyze(const AnalyzeArgs& a) {
  const Dataset d = load(a.data, 3);
  const RoleSet roles = parse_roles(a.roles);
  const auto diag = grader_diagnostics(d, roles);

  std::optional<CorrelationReport> corr;
  std::optional<TruthSet> truth;
  if (!a.truth.empty()) truth = load_truth(a.truth, TruthProvenance::Ta);
  else if (!d.grades_with({GradeRole::Ta}).empty()) truth = truth_from_ta(d);
  RoleSet bias_roles = roles;
  bias_roles.erase(GradeRole::Ta);
  if (truth && !bias_roles.empty()) corr = correlation_report(d, *truth, bias_roles);

  ensure_dir(a.out);
  std::string path;
  if (a.format == "json") {
    path = (fs::path(a.out) / "analysis.json").string();
    csv::write_file(path, dump(analysis_json(diag, corr)));
  } else {
    path = (fs::path(a.out) / "analysis.csv").string();
    csv::write_file(path, analysis_csv(diag, corr));
  }
  for (const auto& [g, why] : diag.skipped) std::cerr << "note: " << g << ": " << why << "\n";
  if (corr)
    for (const auto& n : corr->notes) std::cerr << "note: " << n << "\n";
  else
    std::cerr << "note: no truth available; correlations omitted\n";
  std::cout << "analyzed " << diag.graders.size() << " graders; wrote " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer grading: synthetic data, estimators, evaluation and experiments"};
  app.set_config("--config", "", "TOML/INI file whose keys mirror the flags; flags take precedence");
  app.require_subcommand(1);

  const std::vector<std::string> protocols{"fig1-left", "fig1-right", "fig2-left", "fig2-right", "noisy-truth",
                                           "real-data"};

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset, truth.csv and config.json");
  g->add_option("--protocol", gen.protocol, "fig1-left | fig1-right | fig2-left | fig2-right | ad-shaped")
      ->check(CLI::IsMember({"fig1-left", "fig1-right", "fig2-left", "fig2-right", "ad-shaped"}));
  g->add_option("--k", gen.k, "Peer grades per submission");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--graders", gen.graders, "Number of graders");
  g->add_option("--submissions", gen.submissions, "Submissions per exercise");
  g->add_option("--exercises", gen.exercises, "Number of exercises");
  g->add_option("--generator-file", gen.generator_file, "JSON object of generator parameters (config.json keys)");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--format", gen.format, "Dataset format: csv (directory of files) or json (dataset.json)")
      ->check(CLI::IsMember({"csv", "json"}));

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit one estimator and write fit.json");
  f->add_option("--data", fit.data, "Dataset directory (CSV) or JSON file")->required();
  f->add_option("--model", fit.model, "Estimator")
      ->required()
      ->check(CLI::IsMember({"mean", "median", "ust", "umt", "borda", "bt", "thurstone", "pl", "sn", "smt",
                             "exam-direct", "exam-hybrid"}));
  f->add_option("--roles", fit.roles, "Grade roles to use: self, peer, ta")->delimiter(',');
  f->add_option("--hyper-file", fit.hyper_file, "JSON hyperparameters: mu_score, var_score, var_bias, alpha, beta");
  f->add_option("--truth", fit.truth, "truth.csv (sn, smt)");
  f->add_option("--train-fraction", fit.train_fraction, "Share of truth used for training (sn, smt)");
  f->add_option("--ta-reliability", fit.ta_reliability, "Fixed reliability of the truth pseudo-grader (smt)");
  f->add_option("--exercise", fit.exercise, "Restrict ust to one exercise");
  f->add_option("--source", fit.source, "Ordinal input: grades (induced rankings) or ballots")
      ->check(CLI::IsMember({"grades", "ballots"}));
  f->add_flag("--reliability", fit.reliability, "Estimate grader reliabilities (bt, thurstone, pl)");
  f->add_option("--prior-mean", fit.prior_mean, "Mean of the Normal prior on ordinal latents");
  f->add_option("--prior-var", fit.prior_var, "Variance of the Normal prior on ordinal latents");
  f->add_option("--tolerance", fit.tolerance, "Coordinate-ascent stopping tolerance");
  f->add_option("--max-iterations", fit.max_iterations, "Coordinate-ascent iteration cap");
  f->add_option("--epochs", fit.epochs, "SGD epochs (bt, thurstone, pl)");
  f->add_option("--step", fit.step, "Initial SGD step size");
  f->add_option("--seed", fit.seed, "Seed for SGD order and train/test split");
  f->add_option("--max-group-size", fit.max_group, "Largest allowed group");
  f->add_option("--out", fit.out, "Output fit.json path");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compare a fit against truth");
  e->add_option("--fit", ev.fit, "fit.json")->required();
  e->add_option("--truth", ev.truth, "truth.csv")->required();
  e->add_option("--metric", ev.metric, "l2 | kendall | both")->check(CLI::IsMember({"l2", "kendall", "both"}));
  e->add_flag("--per-exercise", ev.per_exercise, "One row per exercise instead of the aggregate");
  e->add_option("--out", ev.out, "Also write the table to this CSV file");

  ExperimentArgs ex;
  auto* x = app.add_subcommand("experiment", "Run a replicated protocol and write report.csv + report_meta.json");
  x->add_option("--protocol", ex.protocol, "Protocol")->required()->check(CLI::IsMember(protocols));
  x->add_option("--replicates", ex.replicates, "Replicates")->check(CLI::PositiveNumber);
  x->add_option("--seed", ex.seed, "Base seed");
  x->add_option("--jobs", ex.jobs, "Worker threads for replicates");
  x->add_option("--k", ex.k, "Grades per submission (list)")->delimiter(',');
  x->add_option("--estimators", ex.estimators, "Estimators (list)")->delimiter(',');
  x->add_option("--noise-sd", ex.noise_sd, "Truth noise for noisy-truth")->check(CLI::NonNegativeNumber);
  x->add_option("--noisy-base", ex.noisy_base, "Panel perturbed by noisy-truth")
      ->check(CLI::IsMember({"fig1-left", "fig1-right"}));
  x->add_option("--generator-file", ex.generator_file, "JSON generator overrides");
  x->add_option("--data", ex.data, "Dataset for real-data");
  x->add_option("--truth", ex.truth, "truth.csv for real-data (default: mean TA grade)");
  x->add_option("--train-fraction", ex.train_fraction, "Train share for supervised estimators");
  x->add_option("--out", ex.out, "Output directory");

  AnalyzeArgs an;
  auto* y = app.add_subcommand("analyze", "Grader diagnostics and correlations");
  y->add_option("--data", an.data, "Dataset directory (CSV) or JSON file")->required();
  y->add_option("--truth", an.truth, "truth.csv (default: mean TA grade when TA grades exist)");
  y->add_option("--roles", an.roles, "Roles for diagnostics")->delimiter(',');
  y->add_option("--format", an.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  y->add_option("--out", an.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) cmd_generate(gen);
    else if (*f) cmd_fit(fit);
    else if (*e) cmd_evaluate(ev);
    else if (*x) cmd_experiment(ex);
    else if (*y) cmd_analyze(an);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error (" << to_string(err.kind()) << "): " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
