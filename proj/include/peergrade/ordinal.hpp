#pragma once

// Rank aggregation over ordinal ballots: Borda count and three latent-score
// models (Bradley-Terry, Thurstone, Plackett-Luce) fitted by alternating
// stochastic gradient ascent on the log posterior, with optional per-grader
// reliabilities acting as inverse temperatures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peergrade/dataset.hpp"
#include "peergrade/rng.hpp"

namespace peergrade {

struct PairComparison {
  ExerciseId exercise;
  SubmissionId winner;
  SubmissionId loser;
  GraderId grader;
  bool operator==(const PairComparison&) const = default;
};

struct OrdinalFit {
  std::map<SubmissionKey, double> latent;
  /// Empty when reliability estimation is disabled.
  std::map<GraderId, double> reliability;
  std::vector<double> objective_trace;
  std::size_t epochs = 0;
  bool converged = true;
  std::vector<std::string> warnings;
};

struct ScorePrior {
  double mean = 0.5;
  double variance = 1.0 / 36.0;
};

struct ReliabilityPrior {
  double alpha = 10.0;
  double beta = 2.0;
};

struct SgdConfig {
  double step = 0.05;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  /// Relative objective change under which the last epoch counts as converged.
  double tolerance = 1e-6;
};

/// Full rank breaking: every ordered pair of distinct tie-groups yields one
/// comparison; members of one tie-group yield none.
inline std::vector<PairComparison> ballots_to_pairs(const std::vector<OrdinalBallot>& ballots) {
  std::vector<PairComparison> pairs;
  for (const auto& b : ballots)
    for (std::size_t hi = 1; hi < b.ranking.size(); ++hi)
      for (std::size_t lo = 0; lo < hi; ++lo)
        for (const auto& w : b.ranking[hi])
          for (const auto& l : b.ranking[lo]) pairs.push_back({b.exercise, w, l, b.grader});
  return pairs;
}

/// Fractional Borda: an item scores the number of items strictly below it,
/// plus half the number of items it is tied with.
inline OrdinalFit borda(const std::vector<OrdinalBallot>& ballots) {
  OrdinalFit fit;
  for (const auto& b : ballots) {
    double below = 0.0;
    for (const auto& group : b.ranking) {
      const double tied = static_cast<double>(group.size());
      for (const auto& s : group) fit.latent[{b.exercise, s}] += below + 0.5 * (tied - 1.0);
      below += tied;
    }
  }
  return fit;
}

enum class PairLink { Logistic, Probit };

namespace detail {

inline double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

/// d/dz log(sigmoid(z)) = sigmoid(-z).
inline double dlog_sigmoid(double z) {
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  // Mills-ratio asymptotics in the far tail.
  return -0.5 * z * z - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// d/dz log(Phi(z)) = phi(z) / Phi(z).
inline double dlog_normal_cdf(double z) {
  if (z > -30.0) {
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return pdf / normal_cdf(z);
  }
  return -z;
}

/// Indexed view of the ballots: items per exercise, graders, and either pair
/// comparisons or strict best-to-worst lists.
struct OrdinalProblem {
  std::vector<SubmissionKey> items;
  std::vector<GraderId> graders;
  struct Pair {
    std::size_t winner, loser, grader;
  };
  struct List {
    std::vector<std::size_t> best_to_worst;
    std::size_t grader;
  };
  std::vector<Pair> pairs;
  std::vector<List> lists;
  std::vector<double> item_terms;    // likelihood terms touching each item
  std::vector<double> grader_terms;  // likelihood terms per grader
  std::vector<double> prior_mean;
  std::vector<double> prior_var;

  std::size_t item(const SubmissionKey& k) {
    auto [it, fresh] = item_index.emplace(k, items.size());
    if (fresh) items.push_back(k);
    return it->second;
  }
  std::size_t grader(const GraderId& g) {
    auto [it, fresh] = grader_index.emplace(g, graders.size());
    if (fresh) graders.push_back(g);
    return it->second;
  }

  std::map<SubmissionKey, std::size_t> item_index;
  std::map<GraderId, std::size_t> grader_index;
};

inline OrdinalProblem index_ballots(const std::vector<OrdinalBallot>& ballots, bool listwise) {
  OrdinalProblem p;
  for (const auto& b : ballots)
    for (const auto& group : b.ranking)
      for (const auto& s : group) p.item({b.exercise, s});
  for (const auto& b : ballots) {
    const std::size_t g = p.grader(b.grader);
    if (listwise) {
      OrdinalProblem::List list{{}, g};
      for (auto it = b.ranking.rbegin(); it != b.ranking.rend(); ++it) list.best_to_worst.push_back(p.item({b.exercise, it->front()}));
      p.lists.push_back(std::move(list));
    } else {
      for (const auto& c : ballots_to_pairs({b}))
        p.pairs.push_back({p.item({c.exercise, c.winner}), p.item({c.exercise, c.loser}), g});
    }
  }
  p.item_terms.assign(p.items.size(), 0.0);
  p.grader_terms.assign(p.graders.size(), 0.0);
  for (const auto& pr : p.pairs) {
    p.item_terms[pr.winner] += 1.0;
    p.item_terms[pr.loser] += 1.0;
    p.grader_terms[pr.grader] += 1.0;
  }
  for (const auto& l : p.lists) {
    for (std::size_t i : l.best_to_worst) p.item_terms[i] += 1.0;
    p.grader_terms[l.grader] += 1.0;
  }
  return p;
}

/// Connected components of the comparison graph (union-find).
inline std::vector<std::size_t> components(const OrdinalProblem& p) {
  std::vector<std::size_t> parent(p.items.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
  for (const auto& pr : p.pairs) unite(pr.winner, pr.loser);
  for (const auto& l : p.lists)
    for (std::size_t i = 1; i < l.best_to_worst.size(); ++i) unite(l.best_to_worst[0], l.best_to_worst[i]);
  std::vector<std::size_t> out(p.items.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = find(i);
  return out;
}

class OrdinalSolver {
 public:
  enum class Kind { Logistic, Probit, PlackettLuce };

  OrdinalSolver(OrdinalProblem problem, Kind kind, const ReliabilityPrior& rel_prior, const SgdConfig& sgd,
                bool estimate_reliability)
      : p_(std::move(problem)), kind_(kind), rel_prior_(rel_prior), sgd_(sgd), estimate_rel_(estimate_reliability) {
    latent_ = p_.prior_mean;
    log_rel_.assign(p_.graders.size(), estimate_rel_ ? std::log(rel_prior_.alpha / rel_prior_.beta) : 0.0);
  }

  double objective() const {
    double lp = 0.0;
    for (const auto& pr : p_.pairs) lp += log_link(rel(pr.grader) * (latent_[pr.winner] - latent_[pr.loser]));
    for (const auto& l : p_.lists) lp += list_loglik(l);
    for (std::size_t i = 0; i < latent_.size(); ++i) {
      const double d = latent_[i] - p_.prior_mean[i];
      lp -= 0.5 * d * d / p_.prior_var[i];
    }
    if (estimate_rel_)
      for (std::size_t g = 0; g < log_rel_.size(); ++g)
        lp += (rel_prior_.alpha - 1.0) * log_rel_[g] - rel_prior_.beta * std::exp(log_rel_[g]);
    return lp;
  }

  void run(OrdinalFit& fit) {
    Rng rng(sgd_.seed);
    std::vector<std::size_t> order(p_.pairs.empty() ? p_.lists.size() : p_.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    fit.objective_trace.push_back(objective());
    fit.converged = false;
    for (std::size_t epoch = 1; epoch <= sgd_.epochs; ++epoch) {
      const double step = sgd_.step / std::sqrt(static_cast<double>(epoch));
      rng.shuffle(std::span(order));
      for (std::size_t idx : order) score_step(idx, step);
      if (estimate_rel_) {
        rng.shuffle(std::span(order));
        for (std::size_t idx : order) reliability_step(idx, step);
      }
      fit.objective_trace.push_back(objective());
      const double a = fit.objective_trace[fit.objective_trace.size() - 2];
      const double b = fit.objective_trace.back();
      fit.converged = std::abs(b - a) <= sgd_.tolerance * (1.0 + std::abs(b));
    }
    fit.epochs = sgd_.epochs;
  }

  const OrdinalProblem& problem() const { return p_; }
  std::vector<double>& latent() { return latent_; }
  double reliability(std::size_t g) const { return rel(g); }
  bool estimates_reliability() const { return estimate_rel_; }

 private:
  double rel(std::size_t g) const { return estimate_rel_ ? std::exp(log_rel_[g]) : 1.0; }

  double log_link(double z) const { return kind_ == Kind::Probit ? log_normal_cdf(z) : log_sigmoid(z); }
  double dlog_link(double z) const { return kind_ == Kind::Probit ? dlog_normal_cdf(z) : dlog_sigmoid(z); }

  double list_loglik(const OrdinalProblem::List& l) const {
    const double r = rel(l.grader);
    const auto& seq = l.best_to_worst;
    // Suffix log-sum-exp from the worst item upwards.
    double lp = 0.0;
    double lse = -INFINITY;
    for (std::size_t i = seq.size(); i-- > 0;) {
      const double x = r * latent_[seq[i]];
      lse = lse == -INFINITY ? x : std::max(lse, x) + std::log1p(std::exp(-std::abs(lse - x)));
      if (i + 1 < seq.size()) lp += x - lse;
    }
    return lp;
  }

  /// Stage-choice probabilities for a list: grad[j] = d loglik / d (r * u_j).
  std::vector<double> list_gradient(const OrdinalProblem::List& l) const {
    const double r = rel(l.grader);
    const auto& seq = l.best_to_worst;
    const std::size_t m = seq.size();
    std::vector<double> x(m), grad(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) x[j] = r * latent_[seq[j]];
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double top = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(i), x.end());
      double z = 0.0;
      for (std::size_t j = i; j < m; ++j) z += std::exp(x[j] - top);
      grad[i] += 1.0;
      for (std::size_t j = i; j < m; ++j) grad[j] -= std::exp(x[j] - top) / z;
    }
    return grad;
  }

  // Gradient step on the likelihood term, then a proximal step on each
  // touched latent's share of its Gaussian prior (stable for any step size).
  void prox_prior(std::size_t i, double step) {
    const double c = 1.0 / (p_.prior_var[i] * p_.item_terms[i]);
    latent_[i] = (latent_[i] + step * c * p_.prior_mean[i]) / (1.0 + step * c);
  }

  void score_step(std::size_t idx, double step) {
    if (!p_.pairs.empty()) {
      const auto& pr = p_.pairs[idx];
      const double r = rel(pr.grader);
      const double g = r * dlog_link(r * (latent_[pr.winner] - latent_[pr.loser]));
      latent_[pr.winner] += step * g;
      latent_[pr.loser] -= step * g;
      prox_prior(pr.winner, step);
      prox_prior(pr.loser, step);
      return;
    }
    const auto& l = p_.lists[idx];
    const double r = rel(l.grader);
    const auto grad = list_gradient(l);
    for (std::size_t j = 0; j < grad.size(); ++j) latent_[l.best_to_worst[j]] += step * r * grad[j];
    for (std::size_t i : l.best_to_worst) prox_prior(i, step);
  }

  void reliability_step(std::size_t idx, double step) {
    std::size_t g = 0;
    double dlik = 0.0;  // d loglik / d log r
    if (!p_.pairs.empty()) {
      const auto& pr = p_.pairs[idx];
      g = pr.grader;
      const double d = latent_[pr.winner] - latent_[pr.loser];
      const double r = rel(g);
      dlik = r * d * dlog_link(r * d);
    } else {
      const auto& l = p_.lists[idx];
      g = l.grader;
      const auto grad = list_gradient(l);
      const double r = rel(g);
      for (std::size_t j = 0; j < grad.size(); ++j) dlik += grad[j] * r * latent_[l.best_to_worst[j]];
    }
    const double r = rel(g);
    const double dprior = ((rel_prior_.alpha - 1.0) - rel_prior_.beta * r) / p_.grader_terms[g];
    log_rel_[g] = std::clamp(log_rel_[g] + step * (dlik + dprior), std::log(1e-3), std::log(1e3));
  }

  OrdinalProblem p_;
  Kind kind_;
  ReliabilityPrior rel_prior_;
  SgdConfig sgd_;
  bool estimate_rel_;
  std::vector<double> latent_;
  std::vector<double> log_rel_;
};

inline OrdinalFit solve_ordinal(const std::vector<OrdinalBallot>& ballots, OrdinalSolver::Kind kind,
                                const ScorePrior& prior, const std::map<ExerciseId, ScorePrior>& per_exercise,
                                const ReliabilityPrior& rel_prior, const SgdConfig& sgd, bool estimate_reliability) {
  if (!(prior.variance > 0.0)) fail(ErrorKind::Precondition, "score prior variance must be positive");
  if (estimate_reliability && (!(rel_prior.alpha > 0.0) || !(rel_prior.beta > 0.0)))
    fail(ErrorKind::Precondition, "reliability prior needs positive alpha and beta");

  OrdinalFit fit;
  OrdinalProblem p = index_ballots(ballots, kind == OrdinalSolver::Kind::PlackettLuce);
  p.prior_mean.resize(p.items.size());
  p.prior_var.resize(p.items.size());
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    auto it = per_exercise.find(p.items[i].exercise);
    const ScorePrior& sp = it != per_exercise.end() ? it->second : prior;
    p.prior_mean[i] = sp.mean;
    p.prior_var[i] = sp.variance;
  }

  const auto comp = components(p);
  std::map<ExerciseId, std::set<std::size_t>> comps_per_exercise;
  for (std::size_t i = 0; i < p.items.size(); ++i) comps_per_exercise[p.items[i].exercise].insert(comp[i]);
  for (const auto& [e, c] : comps_per_exercise)
    if (c.size() > 1)
      fit.warnings.push_back("exercise '" + e + "': comparison graph has " + std::to_string(c.size()) +
                             " components; each is centred on the prior mean");

  OrdinalSolver solver(std::move(p), kind, rel_prior, sgd, estimate_reliability);
  solver.run(fit);

  const auto& prob = solver.problem();
  auto& latent = solver.latent();
  // Cross-component offsets are unidentifiable: pin each component's mean.
  for (const auto& [e, c] : comps_per_exercise) {
    if (c.size() < 2) continue;
    for (std::size_t root : c) {
      double sum = 0.0, n = 0.0;
      for (std::size_t i = 0; i < prob.items.size(); ++i)
        if (comp[i] == root) {
          sum += latent[i];
          n += 1.0;
        }
      const double shift = prob.prior_mean[root] - sum / n;
      for (std::size_t i = 0; i < prob.items.size(); ++i)
        if (comp[i] == root) latent[i] += shift;
    }
  }
  for (std::size_t i = 0; i < prob.items.size(); ++i) fit.latent[prob.items[i]] = latent[i];
  if (estimate_reliability)
    for (std::size_t g = 0; g < prob.graders.size(); ++g) fit.reliability[prob.graders[g]] = solver.reliability(g);
  return fit;
}

}  // namespace detail

/// Bradley-Terry: P(w beats l) = 1 / (1 + exp(-r_g (u_w - u_l))).
inline OrdinalFit bt_fit(const std::vector<OrdinalBallot>& ballots, const ScorePrior& prior = {},
                         const ReliabilityPrior& rel_prior = {}, const SgdConfig& sgd = {},
                         bool estimate_reliability = false, const std::map<ExerciseId, ScorePrior>& per_exercise = {}) {
  return detail::solve_ordinal(ballots, detail::OrdinalSolver::Kind::Logistic, prior, per_exercise, rel_prior, sgd,
                               estimate_reliability);
}

/// Thurstone (probit): P(w beats l) = Phi(r_g (u_w - u_l)).
inline OrdinalFit thurstone_fit(const std::vector<OrdinalBallot>& ballots, const ScorePrior& prior = {},
                                const ReliabilityPrior& rel_prior = {}, const SgdConfig& sgd = {},
                                bool estimate_reliability = false,
                                const std::map<ExerciseId, ScorePrior>& per_exercise = {}) {
  return detail::solve_ordinal(ballots, detail::OrdinalSolver::Kind::Probit, prior, per_exercise, rel_prior, sgd,
                               estimate_reliability);
}

/// Plackett-Luce over each ballot's best-to-worst sequence with weights
/// exp(r_g * u). Ballots with ties are rank-broken into Bradley-Terry pairs.
inline OrdinalFit pl_fit(const std::vector<OrdinalBallot>& ballots, const ScorePrior& prior = {},
                         const SgdConfig& sgd = {}, bool estimate_reliability = false,
                         const ReliabilityPrior& rel_prior = {},
                         const std::map<ExerciseId, ScorePrior>& per_exercise = {}) {
  const bool strict = std::all_of(ballots.begin(), ballots.end(), [](const OrdinalBallot& b) { return b.strict(); });
  if (!strict) {
    OrdinalFit fit = bt_fit(ballots, prior, rel_prior, sgd, estimate_reliability, per_exercise);
    fit.warnings.insert(fit.warnings.begin(), "ballots contain ties; Plackett-Luce fell back to pairwise Bradley-Terry");
    return fit;
  }
  return detail::solve_ordinal(ballots, detail::OrdinalSolver::Kind::PlackettLuce, prior, per_exercise, rel_prior,
                               sgd, estimate_reliability);
}

/// Affine map of each exercise's latents onto the target mean and
/// (population) variance; constant latents map to the target mean.
inline std::map<SubmissionKey, double> latent_to_scores(const std::map<SubmissionKey, double>& latent, double mean,
                                                        double variance, bool clip) {
  std::map<ExerciseId, std::vector<std::pair<SubmissionKey, double>>> per;
  for (const auto& [k, v] : latent) per[k.exercise].emplace_back(k, v);
  std::map<SubmissionKey, double> out;
  for (const auto& [e, items] : per) {
    double mu = 0.0;
    for (const auto& [k, v] : items) mu += v;
    mu /= static_cast<double>(items.size());
    double var = 0.0;
    for (const auto& [k, v] : items) var += (v - mu) * (v - mu);
    var /= static_cast<double>(items.size());
    const double scale = var > 0.0 ? std::sqrt(variance / var) : 0.0;
    for (const auto& [k, v] : items) {
      double x = mean + scale * (v - mu);
      if (clip) x = std::clamp(x, 0.0, 1.0);
      out[k] = x;
    }
  }
  return out;
}

}  // namespace peergrade
