// Drives a session by hand: prints each display, answers from the hidden
// labels, and shows how RL-C moves the criterion weights.

#include <cstdio>
#include <iostream>

#include "frugal/frugal.hpp"

using namespace frugal;

int main() {
  auto [train, test] = split_dataset(generate_gaussian_mixture({4, 200, 2, 0.1, 0.1, 7}), 0.5, 7);
  auto pool = std::make_shared<const Dataset>(std::move(train));
  auto held = std::make_shared<const Dataset>(std::move(test));

  RunConfig cfg;
  cfg.strategy = parse_strategy("rl-c");
  cfg.T = 8;
  cfg.B = 12;
  cfg.seed = 3;

  Session s(cfg, pool, held);
  while (s.phase() == Phase::awaiting_labels) {
    const auto& display = s.pending_display();
    std::printf("t=%zu display:", s.t());
    for (auto i : display) std::printf(" %s", pool->ids[i].c_str());
    std::printf("\n");
    for (auto i : display) s.submit(i, pool->labels[i]);
    const auto& r = s.advance();
    std::printf("  acc=%.3f  weights=(%.3f, %.3f, %.3f)%s\n", r.test_accuracy.value_or(0.0), r.weights->alpha,
                r.weights->beta, r.weights->eta, r.explored ? "  explored" : "");
  }
  std::cout << "labeled " << s.state().pool.labeled().size() << " of " << pool->size() << '\n';
  return 0;
}
