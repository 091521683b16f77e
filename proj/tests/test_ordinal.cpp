#include <gtest/gtest.h>

#include <numeric>

#include "peergrade/metrics.hpp"
#include "peergrade/ordinal.hpp"

using namespace peergrade;

namespace {

OrdinalBallot strict_ballot(const std::string& grader, const std::vector<std::string>& worst_to_best,
                            const std::string& ex = "e") {
  OrdinalBallot b{ex, grader, {}};
  for (const auto& s : worst_to_best) b.ranking.push_back({s});
  return b;
}

// Full-batch gradient ascent on the Bradley-Terry log posterior with unit
// reliabilities; written independently of the SGD solver.
std::map<std::string, double> bt_batch_oracle(const std::vector<OrdinalBallot>& ballots, double mu, double var) {
  std::vector<std::pair<std::string, std::string>> pairs;  // winner, loser
  std::map<std::string, double> u;
  for (const auto& b : ballots) {
    for (std::size_t i = 0; i < b.ranking.size(); ++i)
      for (const auto& s : b.ranking[i]) u[s] = mu;
    for (std::size_t i = 0; i < b.ranking.size(); ++i)
      for (std::size_t j = i + 1; j < b.ranking.size(); ++j)
        for (const auto& lo : b.ranking[i])
          for (const auto& hi : b.ranking[j]) pairs.emplace_back(hi, lo);
  }
  for (int it = 0; it < 200000; ++it) {
    std::map<std::string, double> grad;
    for (const auto& [s, x] : u) grad[s] = -(x - mu) / var;
    for (const auto& [w, l] : pairs) {
      const double p = 1.0 / (1.0 + std::exp(u[w] - u[l]));  // 1 - sigmoid(u_w - u_l)
      grad[w] += p;
      grad[l] -= p;
    }
    double norm = 0.0;
    for (auto& [s, x] : u) {
      x += 0.01 * grad[s];
      norm = std::max(norm, std::abs(grad[s]));
    }
    if (norm < 1e-12) break;
  }
  return u;
}

}  // namespace

TEST(RankBreaking, TieGroupsYieldNoInternalPairs) {
  OrdinalBallot b{"e", "g", {{"a"}, {"b", "c"}, {"d"}}};
  const auto pairs = ballots_to_pairs({b});
  ASSERT_EQ(pairs.size(), 5u);
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& p : pairs) got.emplace(p.winner, p.loser);
  const std::set<std::pair<std::string, std::string>> want{{"b", "a"}, {"c", "a"}, {"d", "a"}, {"d", "b"}, {"d", "c"}};
  EXPECT_EQ(got, want);
}

TEST(Borda, TextbookOnAllStrictBallots) {
  // For every permutation of up to 5 items, each item scores the number of
  // items ranked below it.
  for (int n = 2; n <= 5; ++n) {
    std::vector<std::string> items;
    for (int i = 0; i < n; ++i) items.push_back("s" + std::to_string(i));
    std::vector<std::string> perm = items;
    do {
      const auto fit = borda({strict_ballot("g", perm)});
      for (int pos = 0; pos < n; ++pos) EXPECT_DOUBLE_EQ(fit.latent.at({"e", perm[pos]}), pos);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Borda, TiesShareHalfPoints) {
  OrdinalBallot b{"e", "g", {{"a"}, {"b", "c"}, {"d"}}};
  const auto fit = borda({b});
  EXPECT_DOUBLE_EQ(fit.latent.at({"e", "a"}), 0.0);
  EXPECT_DOUBLE_EQ(fit.latent.at({"e", "b"}), 1.5);
  EXPECT_DOUBLE_EQ(fit.latent.at({"e", "c"}), 1.5);
  EXPECT_DOUBLE_EQ(fit.latent.at({"e", "d"}), 3.0);
}

TEST(Links, LogNormalCdfIsAccurateInTheTail) {
  for (double z : {-40.0, -10.0, -3.0, 0.0, 2.0, 8.0}) {
    const double exact = std::log(0.5 * std::erfc(-z / std::sqrt(2.0)));
    EXPECT_NEAR(detail::log_normal_cdf(z), exact, 1e-9 * std::max(1.0, std::abs(exact))) << z;
  }
  for (double z : {-30.0, -1.0, 0.0, 3.0, 30.0})
    EXPECT_NEAR(detail::log_sigmoid(z), -std::log1p(std::exp(-z)), 1e-12) << z;
}

TEST(BradleyTerry, SgdAgreesWithBatchOracle) {
  const std::vector<OrdinalBallot> ballots{
      strict_ballot("g1", {"a", "b", "c", "d"}), strict_ballot("g2", {"b", "a", "d"}),
      strict_ballot("g3", {"a", "c", "d"}),      strict_ballot("g4", {"c", "b", "d", "e"}),
      strict_ballot("g5", {"a", "e", "d"}),      strict_ballot("g6", {"b", "e"}),
  };
  SgdConfig sgd;
  sgd.epochs = 3000;
  sgd.step = 0.2;
  const auto fit = bt_fit(ballots, {0.0, 1.0}, {}, sgd);
  const auto oracle = bt_batch_oracle(ballots, 0.0, 1.0);
  for (const auto& [s, u] : oracle) EXPECT_NEAR(fit.latent.at({"e", s}), u, 0.01) << s;
}

TEST(BradleyTerry, ReliabilityStaysInBounds) {
  const std::vector<OrdinalBallot> ballots{strict_ballot("g1", {"a", "b", "c"}), strict_ballot("g2", {"c", "b", "a"}),
                                           strict_ballot("g3", {"a", "b", "c"})};
  const auto fit = bt_fit(ballots, {0.0, 1.0}, {}, {}, true);
  ASSERT_EQ(fit.reliability.size(), 3u);
  for (const auto& [g, r] : fit.reliability) {
    EXPECT_GE(r, 1e-3);
    EXPECT_LE(r, 1e3);
  }
  // The dissenting grader earns less trust than the two who agree.
  EXPECT_LT(fit.reliability.at("g2"), fit.reliability.at("g1"));
}

TEST(PlackettLuce, FallsBackToPairsOnTies) {
  OrdinalBallot tied{"e", "g", {{"a"}, {"b", "c"}}};
  const auto fit = pl_fit({tied, strict_ballot("h", {"a", "c"})});
  ASSERT_FALSE(fit.warnings.empty());
  EXPECT_NE(fit.warnings.front().find("fell back"), std::string::npos);
}

TEST(PlackettLuce, TwoItemListsMatchBradleyTerry) {
  // A two-item Plackett-Luce list is exactly one logistic comparison.
  const std::vector<OrdinalBallot> ballots{strict_ballot("g1", {"a", "b"}), strict_ballot("g2", {"b", "c"}),
                                           strict_ballot("g3", {"a", "c"})};
  SgdConfig sgd;
  sgd.seed = 4;
  const auto pl = pl_fit(ballots, {0.0, 1.0}, sgd);
  const auto bt = bt_fit(ballots, {0.0, 1.0}, {}, sgd);
  for (const auto& [k, v] : bt.latent) EXPECT_NEAR(pl.latent.at(k), v, 1e-9);
}

TEST(Ordinal, DisconnectedComponentsAreCentredAndWarned) {
  const std::vector<OrdinalBallot> ballots{strict_ballot("g1", {"a", "b"}), strict_ballot("g2", {"c", "d"})};
  const auto fit = thurstone_fit(ballots, {0.5, 0.1});
  ASSERT_EQ(fit.warnings.size(), 1u);
  EXPECT_NEAR(fit.latent.at({"e", "a"}) + fit.latent.at({"e", "b"}), 1.0, 1e-12);
  EXPECT_NEAR(fit.latent.at({"e", "c"}) + fit.latent.at({"e", "d"}), 1.0, 1e-12);
  EXPECT_LT(fit.latent.at({"e", "a"}), fit.latent.at({"e", "b"}));
}

TEST(Ordinal, SeededRunsAreReproducible) {
  const std::vector<OrdinalBallot> ballots{strict_ballot("g1", {"a", "b", "c"}), strict_ballot("g2", {"b", "c", "a"})};
  SgdConfig sgd;
  sgd.seed = 9;
  EXPECT_EQ(bt_fit(ballots, {}, {}, sgd, true).latent, bt_fit(ballots, {}, {}, sgd, true).latent);
}

TEST(Ordinal, InvalidPriorRejected) {
  EXPECT_THROW(bt_fit({strict_ballot("g", {"a", "b"})}, {0.0, 0.0}), Error);
}

TEST(LatentToScores, MatchesTargetMoments) {
  std::map<SubmissionKey, double> latent{{{"e", "a"}, -2.0}, {{"e", "b"}, 0.0}, {{"e", "c"}, 5.0}};
  const auto s = latent_to_scores(latent, 0.6, 0.04, false);
  double m = 0.0, v = 0.0;
  for (const auto& [k, x] : s) m += x;
  m /= 3.0;
  for (const auto& [k, x] : s) v += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.6, 1e-12);
  EXPECT_NEAR(v / 3.0, 0.04, 1e-12);
  EXPECT_DOUBLE_EQ(kendall_tau_error(by_exercise(s).at("e"), by_exercise(latent).at("e")), 0.0);
}
