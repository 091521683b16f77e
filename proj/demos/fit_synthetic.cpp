// Generate one synthetic course and compare the averaging baseline with the
// bias/reliability model.

#include <iostream>

#include "peergrade/cardinal.hpp"
#include "peergrade/metrics.hpp"
#include "peergrade/synth.hpp"

int main() {
  using namespace peergrade;
  const auto data = generate(fig1_left_config(4, 2024));

  const auto mean = mean_estimate(data.dataset);
  const auto umt = umt_fit(data.dataset);

  std::cout << "exercise  mean_l2  umt_l2\n";
  const auto a = per_exercise_errors(mean.scores, data.truth, Metric::L2);
  const auto b = per_exercise_errors(umt.scores, data.truth, Metric::L2);
  for (const auto& [e, err] : a.errors) std::cout << e << "  " << err << "  " << b.errors.at(e) << "\n";
  std::cout << "umt converged after " << umt.iterations << " iterations\n";

  // The strongest over- and under-grader according to the model.
  auto [lo, hi] = std::minmax_element(umt.bias.begin(), umt.bias.end(),
                                      [](const auto& x, const auto& y) { return x.second < y.second; });
  std::cout << "harshest " << lo->first << " (" << lo->second << " vs planted " << data.traits.at(lo->first).bias
            << "), most lenient " << hi->first << " (" << hi->second << " vs planted "
            << data.traits.at(hi->first).bias << ")\n";
}
