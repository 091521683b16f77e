// Aggregate a handful of hand-written rankings with Borda and Bradley-Terry.

#include <iostream>

#include "peergrade/ordinal.hpp"

int main() {
  using namespace peergrade;
  auto ballot = [](std::string grader, std::vector<std::string> worst_to_best) {
    OrdinalBallot b{"ex1", std::move(grader), {}};
    for (auto& s : worst_to_best) b.ranking.push_back({std::move(s)});
    return b;
  };
  const std::vector<OrdinalBallot> ballots{
      ballot("ann", {"s1", "s2", "s3", "s4"}),
      ballot("bob", {"s2", "s1", "s4"}),
      ballot("cid", {"s1", "s3", "s4"}),
      ballot("dee", {"s3", "s2", "s4", "s5"}),
  };

  const auto bc = borda(ballots);
  SgdConfig sgd;
  sgd.seed = 1;
  const auto bt = bt_fit(ballots, {0.0, 1.0}, {}, sgd, true);

  std::cout << "submission  borda  bt\n";
  for (const auto& [k, v] : bc.latent) std::cout << k.submission << "  " << v << "  " << bt.latent.at(k) << "\n";
  for (const auto& [g, r] : bt.reliability) std::cout << g << " reliability " << r << "\n";
}
