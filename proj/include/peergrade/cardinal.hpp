#pragma once

// Cardinal estimators: Mean, Median, and the Gaussian bias/reliability model
// fitted per exercise (UST) or jointly over all exercises (UMT).
//
// Model: grade(s, g) ~ N(score_s + bias_g, 1 / reliability_g) with priors
//   score_s ~ N(mu_e, var_e)   (per exercise e)
//   bias_g  ~ N(0, var_bias)
//   reliability_g ~ Gamma(alpha, rate beta)
// and fitted to its posterior mode by block coordinate ascent. Every block
// update is the exact conditional maximizer, so the log posterior never
// decreases.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "peergrade/dataset.hpp"

namespace peergrade {

struct Hyperparams {
  /// Score prior; unset means the sample mean/variance of each exercise's grades.
  std::optional<double> mu_score;
  std::optional<double> var_score;
  double var_bias = 1.0 / 36.0;
  double alpha = 3.0;
  double beta = 1.0 / 30.0;

  void validate() const {
    if (var_score && !(*var_score > 0.0)) fail(ErrorKind::Precondition, "score prior variance must be positive");
    if (!(var_bias > 0.0)) fail(ErrorKind::Precondition, "bias prior variance must be positive");
    if (!(alpha > 0.0) || !(beta > 0.0)) fail(ErrorKind::Precondition, "reliability prior needs positive alpha and beta");
  }
};

struct EmConfig {
  double tolerance = 1e-6;
  std::size_t max_iterations = 500;
  double reliability_floor = 1e-6;
};

struct ModelFit {
  std::map<SubmissionKey, double> scores;
  std::map<GraderId, double> bias;
  std::map<GraderId, double> reliability;
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const Hyperparams& h) {
  nlohmann::json j;
  j["mu_score"] = h.mu_score ? nlohmann::json(*h.mu_score) : nlohmann::json(nullptr);
  j["var_score"] = h.var_score ? nlohmann::json(*h.var_score) : nlohmann::json(nullptr);
  j["var_bias"] = h.var_bias;
  j["alpha"] = h.alpha;
  j["beta"] = h.beta;
  return j;
}

/// Reads the keys of `to_json`; absent keys keep their defaults.
inline Hyperparams hyperparams_from_json(const nlohmann::json& j, Hyperparams h = {}) {
  if (!j.is_object()) fail(ErrorKind::Schema, "hyperparameters must be a JSON object");
  static const std::set<std::string> known{"mu_score", "var_score", "var_bias", "alpha", "beta"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::Schema, "unknown hyperparameter '" + key + "'");
    if (!value.is_null() && !value.is_number()) fail(ErrorKind::Schema, "hyperparameter '" + key + "' must be a number");
  }
  auto opt = [&](const char* key, std::optional<double>& slot) {
    if (j.contains(key)) slot = j.at(key).is_null() ? std::nullopt : std::optional<double>(j.at(key).get<double>());
  };
  opt("mu_score", h.mu_score);
  opt("var_score", h.var_score);
  if (j.contains("var_bias") && !j.at("var_bias").is_null()) h.var_bias = j.at("var_bias").get<double>();
  if (j.contains("alpha") && !j.at("alpha").is_null()) h.alpha = j.at("alpha").get<double>();
  if (j.contains("beta") && !j.at("beta").is_null()) h.beta = j.at("beta").get<double>();
  h.validate();
  return h;
}

namespace detail {

inline std::map<SubmissionKey, std::vector<double>> grades_by_submission(const Dataset& d, const RoleSet& roles) {
  std::map<SubmissionKey, std::vector<double>> out;
  for (const auto& g : d.grades())
    if (roles.count(g.role)) out[{g.exercise, g.submission}].push_back(g.value);
  return out;
}

template <typename Reduce>
ModelFit baseline_estimate(const Dataset& d, const RoleSet& roles, Reduce reduce) {
  auto grouped = grades_by_submission(d, roles);
  ModelFit fit;
  for (const auto& [s, e] : d.submission_exercise()) {
    auto it = grouped.find({e, s});
    if (it == grouped.end())
      fail(ErrorKind::InsufficientData, "submission '" + s + "' has no " + to_string(roles) + " grade");
    fit.scores[{e, s}] = reduce(it->second);
  }
  return fit;
}

}  // namespace detail

inline double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline ModelFit mean_estimate(const Dataset& d, const RoleSet& roles = {GradeRole::Peer}) {
  return detail::baseline_estimate(d, roles, [](const std::vector<double>& v) { return mean_of(v); });
}

inline ModelFit median_estimate(const Dataset& d, const RoleSet& roles = {GradeRole::Peer}) {
  return detail::baseline_estimate(d, roles, [](const std::vector<double>& v) { return median_of(v); });
}

/// What a Gaussian fit consumes beyond the dataset.
struct GaussianFitOptions {
  RoleSet roles{GradeRole::Peer};
  /// Restrict to one exercise (single-task fit).
  std::optional<ExerciseId> exercise;
  /// Graders whose reliability is held at the given value.
  std::map<GraderId, double> fixed_reliability;
  /// Graders whose bias is held at 0.
  std::set<GraderId> fixed_bias;
  /// Additional observations (e.g. injected TA grades); not used for the score prior.
  std::vector<CardinalGrade> extra_grades;
  /// Graders left out of the reported bias/reliability maps.
  std::set<GraderId> hidden_graders;
};

/// The Gaussian bias/reliability model over an indexed problem.
class GaussianModel {
 public:
  GaussianModel(const Dataset& d, const Hyperparams& hyper, const EmConfig& config, const GaussianFitOptions& options)
      : hyper_(hyper), config_(config) {
    hyper_.validate();
    RoleSet roles = options.roles;
    if (roles.erase(GradeRole::Ta)) warnings_.push_back("TA grades are treated as truth and ignored by unsupervised fits");
    if (roles.empty()) fail(ErrorKind::Precondition, "no grade roles selected");

    std::map<SubmissionKey, std::size_t> item_index;
    std::map<GraderId, std::size_t> grader_index;
    std::map<ExerciseId, std::vector<double>> exercise_values;

    auto add = [&](const CardinalGrade& g, bool for_prior) {
      if (options.exercise && g.exercise != *options.exercise) return;
      auto [it, fresh] = item_index.emplace(SubmissionKey{g.exercise, g.submission}, items_.size());
      if (fresh) items_.push_back(it->first);
      auto [jt, gfresh] = grader_index.emplace(g.grader, graders_.size());
      if (gfresh) graders_.push_back(g.grader);
      obs_.push_back({it->second, jt->second, g.value});
      if (for_prior) exercise_values[g.exercise].push_back(g.value);
    };
    for (const auto& g : d.grades())
      if (roles.count(g.role)) add(g, true);
    for (const auto& g : options.extra_grades) add(g, false);
    if (options.exercise && obs_.empty())
      fail(ErrorKind::InsufficientData, "exercise '" + *options.exercise + "' has no " + to_string(roles) + " grades");
    if (obs_.empty()) fail(ErrorKind::InsufficientData, "dataset has no " + to_string(roles) + " grades");

    // Observations are held in item order so per-item sums are contiguous.
    std::stable_sort(obs_.begin(), obs_.end(), [](const Obs& a, const Obs& b) { return a.item < b.item; });

    item_mu_.resize(items_.size());
    item_var_.resize(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& ex = items_[i].exercise;
      auto [mu, var] = score_prior(exercise_values[ex]);
      item_mu_[i] = hyper_.mu_score.value_or(mu);
      item_var_[i] = hyper_.var_score.value_or(var);
    }

    fixed_rel_.assign(graders_.size(), std::nullopt);
    fixed_bias_.assign(graders_.size(), false);
    hidden_.assign(graders_.size(), false);
    for (std::size_t g = 0; g < graders_.size(); ++g) {
      if (auto it = options.fixed_reliability.find(graders_[g]); it != options.fixed_reliability.end())
        fixed_rel_[g] = std::max(it->second, config_.reliability_floor);
      fixed_bias_[g] = options.fixed_bias.count(graders_[g]) > 0;
      hidden_[g] = options.hidden_graders.count(graders_[g]) > 0;
    }
    initialize();
  }

  /// Sample mean and variance of an exercise's grades, the default score prior.
  static std::pair<double, double> score_prior(const std::vector<double>& values) {
    if (values.empty()) return {0.5, 1.0 / 36.0};
    const double mu = mean_of(values);
    if (values.size() < 2) return {mu, 1.0 / 36.0};
    double ss = 0.0;
    for (double x : values) ss += (x - mu) * (x - mu);
    const double var = ss / static_cast<double>(values.size() - 1);
    // A constant exercise gives no spread to learn from; fall back to a weak default.
    return {mu, var > 1e-12 ? var : 1.0 / 36.0};
  }

  void initialize() {
    score_.assign(items_.size(), 0.0);
    std::vector<double> count(items_.size(), 0.0);
    for (const auto& o : obs_) {
      score_[o.item] += o.value;
      count[o.item] += 1.0;
    }
    for (std::size_t i = 0; i < items_.size(); ++i) score_[i] = count[i] > 0 ? score_[i] / count[i] : item_mu_[i];
    bias_.assign(graders_.size(), 0.0);
    rel_.assign(graders_.size(), hyper_.alpha / hyper_.beta);
    for (std::size_t g = 0; g < graders_.size(); ++g)
      if (fixed_rel_[g]) rel_[g] = *fixed_rel_[g];
  }

  double log_posterior() const {
    double lp = 0.0;
    for (const auto& o : obs_) {
      const double r = rel_[o.grader];
      const double resid = o.value - score_[o.item] - bias_[o.grader];
      lp += 0.5 * std::log(r) - 0.5 * r * resid * resid;
    }
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const double d = score_[i] - item_mu_[i];
      lp -= 0.5 * d * d / item_var_[i];
    }
    for (std::size_t g = 0; g < graders_.size(); ++g) {
      if (!fixed_bias_[g]) lp -= 0.5 * bias_[g] * bias_[g] / hyper_.var_bias;
      if (!fixed_rel_[g]) lp += (hyper_.alpha - 1.0) * std::log(rel_[g]) - hyper_.beta * rel_[g];
    }
    return lp;
  }

  /// Conditional maximizer of every score given biases and reliabilities.
  double update_scores() {
    std::vector<double> num(items_.size()), den(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      num[i] = item_mu_[i] / item_var_[i];
      den[i] = 1.0 / item_var_[i];
    }
    for (const auto& o : obs_) {
      num[o.item] += rel_[o.grader] * (o.value - bias_[o.grader]);
      den[o.item] += rel_[o.grader];
    }
    double change = 0.0;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const double next = num[i] / den[i];
      change = std::max(change, std::abs(next - score_[i]));
      score_[i] = next;
    }
    return change;
  }

  double update_biases() {
    std::vector<double> sum(graders_.size(), 0.0), n(graders_.size(), 0.0);
    for (const auto& o : obs_) {
      sum[o.grader] += o.value - score_[o.item];
      n[o.grader] += 1.0;
    }
    double change = 0.0;
    for (std::size_t g = 0; g < graders_.size(); ++g) {
      if (fixed_bias_[g]) continue;
      const double next = rel_[g] * sum[g] / (1.0 / hyper_.var_bias + n[g] * rel_[g]);
      change = std::max(change, std::abs(next - bias_[g]));
      bias_[g] = next;
    }
    return change;
  }

  double update_reliabilities() {
    std::vector<double> ss(graders_.size(), 0.0), n(graders_.size(), 0.0);
    for (const auto& o : obs_) {
      const double resid = o.value - score_[o.item] - bias_[o.grader];
      ss[o.grader] += resid * resid;
      n[o.grader] += 1.0;
    }
    double change = 0.0;
    for (std::size_t g = 0; g < graders_.size(); ++g) {
      if (fixed_rel_[g]) continue;
      const double mode = (hyper_.alpha - 1.0 + 0.5 * n[g]) / (hyper_.beta + 0.5 * ss[g]);
      const double next = std::max(mode, config_.reliability_floor);
      change = std::max(change, std::abs(next - rel_[g]));
      rel_[g] = next;
    }
    return change;
  }

  /// Runs coordinate ascent from the current state until the largest
  /// parameter change drops below the tolerance or the iteration cap is hit.
  void run() {
    trace_.assign(1, log_posterior());
    converged_ = false;
    iterations_ = 0;
    while (iterations_ < config_.max_iterations) {
      double change = update_scores();
      change = std::max(change, update_biases());
      change = std::max(change, update_reliabilities());
      ++iterations_;
      trace_.push_back(log_posterior());
      if (change < config_.tolerance) {
        converged_ = true;
        break;
      }
    }
  }

  void set_reliability(const GraderId& g, double value) {
    for (std::size_t i = 0; i < graders_.size(); ++i)
      if (graders_[i] == g) rel_[i] = std::max(value, config_.reliability_floor);
  }

  ModelFit result() const {
    ModelFit fit;
    for (std::size_t i = 0; i < items_.size(); ++i) fit.scores[items_[i]] = score_[i];
    for (std::size_t g = 0; g < graders_.size(); ++g) {
      if (hidden_[g]) continue;
      fit.bias[graders_[g]] = bias_[g];
      fit.reliability[graders_[g]] = rel_[g];
    }
    fit.objective_trace = trace_;
    fit.iterations = iterations_;
    fit.converged = converged_;
    fit.warnings = warnings_;
    return fit;
  }

  const std::vector<GraderId>& graders() const { return graders_; }
  double reliability(std::size_t g) const { return rel_[g]; }

 private:
  struct Obs {
    std::size_t item;
    std::size_t grader;
    double value;
  };

  Hyperparams hyper_;
  EmConfig config_;
  std::vector<SubmissionKey> items_;
  std::vector<double> item_mu_, item_var_;
  std::vector<GraderId> graders_;
  std::vector<std::optional<double>> fixed_rel_;
  std::vector<bool> fixed_bias_, hidden_;
  std::vector<Obs> obs_;

  std::vector<double> score_, bias_, rel_;
  std::vector<double> trace_;
  std::size_t iterations_ = 0;
  bool converged_ = false;
  std::vector<std::string> warnings_;
};

inline ModelFit fit_gaussian(const Dataset& d, const Hyperparams& hyper, const EmConfig& config,
                             const GaussianFitOptions& options) {
  GaussianModel model(d, hyper, config, options);
  model.run();
  return model.result();
}

/// Single-task fit: one exercise in isolation.
inline ModelFit ust_fit(const Dataset& d, const ExerciseId& exercise, const Hyperparams& hyper = {},
                        const EmConfig& config = {}, const RoleSet& roles = {GradeRole::Peer}) {
  GaussianFitOptions o;
  o.roles = roles;
  o.exercise = exercise;
  return fit_gaussian(d, hyper, config, o);
}

/// UST over every exercise, merged. Grader parameters are per exercise, so
/// the merged fit reports scores and the per-exercise traces concatenated.
inline ModelFit ust_fit_all(const Dataset& d, const Hyperparams& hyper = {}, const EmConfig& config = {},
                            const RoleSet& roles = {GradeRole::Peer}) {
  ModelFit merged;
  std::set<ExerciseId> graded;
  for (const auto& g : d.grades())
    if (roles.count(g.role)) graded.insert(g.exercise);
  for (const auto& e : graded) {
    ModelFit f = ust_fit(d, e, hyper, config, roles);
    merged.scores.insert(f.scores.begin(), f.scores.end());
    merged.objective_trace.insert(merged.objective_trace.end(), f.objective_trace.begin(), f.objective_trace.end());
    merged.iterations += f.iterations;
    merged.converged = merged.converged && f.converged;
    for (auto& w : f.warnings) merged.warnings.push_back(e + ": " + w);
  }
  return merged;
}

/// Multi-task fit: one bias and reliability per grader shared across exercises.
inline ModelFit umt_fit(const Dataset& d, const Hyperparams& hyper = {}, const EmConfig& config = {},
                        const RoleSet& roles = {GradeRole::Peer}) {
  GaussianFitOptions o;
  o.roles = roles;
  return fit_gaussian(d, hyper, config, o);
}

}  // namespace peergrade
