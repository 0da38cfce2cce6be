// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "frugal/frugal.hpp"
#include "frugal/serialize.hpp"
#include "oracles.hpp"

using namespace frugal;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Candidate matrices from real clustering of random points, with random
// stochastic scores.
oracle::Problem clustered_problem(std::size_t m, std::size_t K, std::size_t nc, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(m, 2);
  for (auto& v : x.data()) v = 3.0 * rng.normal();
  auto mats = materialize(kmeans(x, K, seed), x);
  Matrix F(m, nc);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < nc; ++c) s += (F(i, c) = std::pow(rng.uniform_positive(), 3));
    for (std::size_t c = 0; c < nc; ++c) F(i, c) /= s;
  }
  return {std::move(mats.C), std::move(mats.D), std::move(F)};
}

Outcome solver_simplex_suite() {
  Rng rng(derive_seed(1, 100));
  const std::size_t sizes[] = {10, 100, 500};
  int converged = 0, instances = 200;
  double worst_sum = 0.0, solve_time = 0.0;
  bool nonneg = true;
  for (int k = 0; k < instances; ++k) {
    const std::size_t m = sizes[k % 3];
    const std::size_t K = 2 + rng.below(std::min<std::size_t>(19, m - 1)), nc = 2 + rng.below(9);
    auto p = clustered_problem(m, K, nc, static_cast<std::uint64_t>(k));
    CriterionWeights w{2 * rng.uniform(), 2 * rng.uniform(), 2 * rng.uniform(), GammaPolicy::auto_scaled()};
    const auto t0 = Clock::now();
    auto mv = solve_fixed_point(p.C, p.D, p.F, w, static_cast<std::uint64_t>(k), {}, {}, true);
    solve_time += seconds_since(t0);
    for (const auto& it : mv.iterates) {
      double s = 0.0;
      for (double v : it) {
        nonneg = nonneg && v >= 0.0;
        s += v;
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    converged += mv.converged && mv.final_residual < 1e-6 && mv.iterations_used <= 100;
  }
  const double share = converged / double(instances);
  return {nonneg && worst_sum <= 1e-12 && share >= 0.95 && solve_time < 10.0,
          fmt("converged %d/%d (%.1f%%), max |sum-1| %.2e, nonneg %s, %.3f s", converged, instances, 100 * share,
              worst_sum, nonneg ? "yes" : "no", solve_time)};
}

Outcome one_step_convergence() {
  Rng rng(derive_seed(2, 100));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto p = oracle::random_problem(5 + rng.below(200), 2 + rng.below(19), 2 + rng.below(9), 1000 + k);
    CriterionWeights w{0.0, 2 * rng.uniform(), 2 * rng.uniform(),
                       k % 2 ? GammaPolicy::auto_scaled() : GammaPolicy::fixed(0.2 + rng.uniform())};
    auto mv = solve_fixed_point(p.C, p.D, p.F, w, static_cast<std::uint64_t>(k));
    if (mv.residual_trace.size() < 2) return {false, fmt("instance %d stopped after one step", k)};
    worst = std::max(worst, mv.residual_trace[1]);
  }
  return {worst <= 1e-15, fmt("max second-step residual %.3e over 50 instances", worst)};
}

Outcome grid_oracle() {
  double worst_gap = -1e300;
  for (int k = 0; k < 20; ++k) {
    auto p = oracle::random_problem(6, 2, 2, 2000 + k);
    auto w = oracle::weights(1, 1, 1, GammaPolicy::fixed(1.0));
    auto mv = solve_fixed_point(p.C, p.D, p.F, w, static_cast<std::uint64_t>(k));
    const double fp = evaluate_objective(mv.mu, p.C, p.D, p.F, w, 1.0);
    worst_gap = std::max(worst_gap, fp - oracle::grid_minimum(p, w, 1.0, 20));
  }
  return {worst_gap <= 1e-3, fmt("max (fixed point - grid minimum) %.3e over 20 instances", worst_gap)};
}

Outcome objective_oracle() {
  Rng rng(derive_seed(4, 100));
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    auto p = oracle::random_problem(2 + rng.below(30), 1 + rng.below(6), 2 + rng.below(5), 3000 + k);
    auto mu = oracle::random_simplex(p.C.rows(), rng);
    if (k % 4 == 0) mu[0] = 0.0, oracle::random_simplex(1, rng);
    double s = 0.0;
    for (double v : mu) s += v;
    for (double& v : mu) v /= s;
    const double a = 2 * rng.uniform(), b = 2 * rng.uniform(), e = 2 * rng.uniform(), g = 0.05 + 2 * rng.uniform();
    const double got = evaluate_objective(mu, p.C, p.D, p.F, oracle::weights(a, b, e), g);
    worst = std::max(worst, std::abs(got - oracle::naive_objective(mu, p, a, b, e, g)));
  }
  return {worst <= 1e-12, fmt("max |difference| %.3e over 100 instances", worst)};
}

Outcome gradient_check() {
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(derive_seed(5, 100, k));
    const std::size_t n = 4 + rng.below(12), d = 1 + rng.below(5), nc = 2 + rng.below(5);
    auto m = SoftmaxModel::zeros(nc, d);
    Matrix x(n, d);
    std::vector<int> y(n);
    for (auto& v : x.data()) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.below(nc));
    for (auto& v : m.weights.data()) v = rng.normal();
    for (auto& v : m.bias) v = rng.normal();
    const double l2 = 1e-4 * (k % 3);
    Matrix gw;
    std::vector<double> gb;
    softmax_loss(m, x, y, l2, &gw, &gb);
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = softmax_loss(m, x, y, l2);
      param = keep - h;
      const double down = softmax_loss(m, x, y, l2);
      param = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8}));
    };
    for (std::size_t q = 0; q < gw.data().size(); ++q) check(m.weights.data()[q], gw.data()[q]);
    for (std::size_t c = 0; c < nc; ++c) check(m.bias[c], gb[c]);
  }
  return {worst <= 1e-6, fmt("max relative error %.3e over 20 problems", worst)};
}

Outcome q_learning() {
  QTable t;
  t.q = {0.5, 0.6};
  t.prev_action = 0;
  update_qtable(t, 0.8);
  const double bellman_err = std::abs(t.q[0] - 0.584);

  QTable single;
  single.q = {0.0};
  single.prev_action = 0;
  single.gamma_rl = 1.0;  // q <- r + delta q
  bool monotone = true;
  for (int k = 0; k < 500; ++k) {
    const double before = single.q[0];
    update_qtable(single, 1.0);
    monotone = monotone && single.q[0] >= before;
  }
  const double rec_err = std::abs(single.q[0] - 10.0);

  bool freq_ok = true;
  std::string freq;
  const int draws = 10000;
  const auto space = ActionSpace::discrete();
  for (std::size_t step = 0; step <= 3; ++step) {
    int explored = 0;
    for (int s = 0; s < draws; ++s) {
      auto table = init_qtable(space, static_cast<std::uint64_t>(s));
      explored += choose_action(table, step).explored;
    }
    const double p = std::exp(-static_cast<double>(step)), got = explored / double(draws);
    const double sigma = std::sqrt(p * (1 - p) / draws);
    freq_ok = freq_ok && std::abs(got - p) <= 3 * sigma + 1e-12;
    freq += fmt(" t=%zu %.4f/%.4f", step, got, p);
  }
  return {bellman_err <= 1e-12 && rec_err <= 1e-6 && monotone && freq_ok,
          fmt("bellman err %.1e, recurrence |q-10| %.1e, explore", bellman_err, rec_err) + freq};
}

Outcome term_directions() {
  bool rep_ok = true, div_ok = true, amb_ok = true;
  // representativity: four candidates with increasing own-cluster distance
  {
    oracle::Problem p{Matrix(4, 2), Matrix(4, 2), Matrix(4, 2, 0.5)};
    const double own[] = {0.05, 0.3, 1.1, 2.0};
    for (std::size_t i = 0; i < 4; ++i) {
      p.C(i, i % 2) = 1.0;
      p.D(i, i % 2) = own[i];
      p.D(i, 1 - i % 2) = 9.0;
    }
    for (double g : {0.3, 1.0, 4.0}) {
      auto mv = solve_fixed_point(p.C, p.D, p.F, oracle::weights(0, 0, 1, GammaPolicy::fixed(g)), 1);
      for (std::size_t i = 0; i + 1 < 4; ++i) rep_ok = rep_ok && mv.mu[i] > mv.mu[i + 1];
    }
  }
  // diversity: candidates in the heavier cluster get less mass
  {
    oracle::Problem p{Matrix(4, 2), Matrix(4, 2), Matrix(4, 2, 0.5)};
    p.C(0, 0) = p.C(1, 0) = p.C(2, 1) = p.C(3, 1) = 1.0;
    FixedPointMap map(p.C, p.D, p.F, oracle::weights(1, 0, 0));
    for (double heavy : {0.6, 0.8, 0.95}) {
      std::vector<double> mu{heavy / 2, heavy / 2, (1 - heavy) / 2, (1 - heavy) / 2};
      auto next = map.apply(mu, Relaxation::literal).mu;
      div_ok = div_ok && next[0] < next[2] && next[1] < next[3];
      // the relaxed step keeps part of the old mass, so only the ratio has to move
      next = map.apply(mu, Relaxation::balanced).mu;
      div_ok = div_ok && next[0] / next[2] < mu[0] / mu[2];
    }
  }
  // ambiguity: uniform score row beats one-hot
  {
    oracle::Problem p{Matrix(2, 2), Matrix(2, 2), Matrix(2, 2)};
    p.C(0, 0) = p.C(1, 1) = 1.0;
    p.F(0, 0) = p.F(0, 1) = 0.5;
    p.F(1, 1) = 1.0;
    for (auto g : {GammaPolicy::fixed(1.0), GammaPolicy::auto_scaled()}) {
      FixedPointMap map(p.C, p.D, p.F, oracle::weights(0, 1, 0, g));
      auto next = map.apply(std::vector<double>{0.5, 0.5}).mu;
      amb_ok = amb_ok && next[0] > next[1];
    }
  }
  return {rep_ok && div_ok && amb_ok, fmt("representativity %s, diversity %s, ambiguity %s", rep_ok ? "ok" : "FAIL",
                                          div_ok ? "ok" : "FAIL", amb_ok ? "ok" : "FAIL")};
}

double final_mean(const StrategyRow& row) { return row.curve.back().mean_accuracy; }

std::string curve_text(const StrategyRow& row) {
  std::string s = row.strategy + ":";
  for (const auto& p : row.curve) s += fmt(" %.3f", p.mean_accuracy);
  return s;
}

Outcome benchmark() {
  const auto t0 = Clock::now();
  auto [train, test] = split_dataset(generate_gaussian_mixture({4, 500, 2, 0.1, 0.1, 7}), 0.5, 7);
  auto pool = std::make_shared<const Dataset>(std::move(train));
  auto held = std::make_shared<const Dataset>(std::move(test));
  std::vector<RunConfig> configs;
  for (const char* s : {"random", "flat", "rl-c", "uncertainty"}) {
    RunConfig c;
    c.strategy = parse_strategy(s);
    c.T = 10;
    c.B = 16;
    c.K = 16;
    configs.push_back(c);
  }
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const auto cmp = compare(configs, pool, held, seeds);
  const double random = final_mean(cmp.rows[0]), flat = final_mean(cmp.rows[1]), rlc = final_mean(cmp.rows[2]),
               unc = final_mean(cmp.rows[3]);
  const double elapsed = seconds_since(t0);
  const bool a = flat >= random, b = rlc >= flat - 0.02, c_beats = unc > random;
  std::string detail = fmt("final acc random %.4f flat %.4f rl-c %.4f uncertainty %.4f; (a) %s (b) %s (c) %s; %.1f s",
                           random, flat, rlc, unc, a ? "ok" : "FAIL", b ? "ok" : "FAIL",
                           c_beats ? "uncertainty beats random" : "inversion reported", elapsed);
  if (!a || !c_beats) {
    for (const auto& row : cmp.rows) std::printf("    curve %s\n", curve_text(row).c_str());
  }
  return {a && b && elapsed < 300.0, detail};
}

Outcome determinism() {
  auto [train, test] = split_dataset(generate_gaussian_mixture({4, 150, 2, 0.1, 0.1, 11}), 0.5, 11);
  auto pool = std::make_shared<const Dataset>(std::move(train));
  auto held = std::make_shared<const Dataset>(std::move(test));
  int identical = 0, total = 0;
  for (const auto& name : known_strategies()) {
    for (bool recluster : {false, true}) {
      RunConfig c;
      c.strategy = parse_strategy(name);
      c.T = 6;
      c.B = 12;
      c.seed = 42;
      c.recluster = recluster;
      if (recluster && !c.strategy.uses_solver()) continue;
      ++total;
      identical += records_to_ndjson(c, run(c, pool, held).records) == records_to_ndjson(c, run(c, pool, held).records);
    }
  }
  return {identical == total, fmt("%d/%d configs byte-identical across two runs", identical, total)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"solver simplex suite", solver_simplex_suite},
      {"one-step convergence at alpha=0", one_step_convergence},
      {"grid-oracle optimality", grid_oracle},
      {"objective oracle", objective_oracle},
      {"classifier gradient check", gradient_check},
      {"Q-learning arithmetic", q_learning},
      {"term-direction properties", term_directions},
      {"desk-scale benchmark", benchmark},
      {"end-to-end determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
