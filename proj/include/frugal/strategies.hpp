#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "frugal/display_solver.hpp"

namespace frugal {

enum class StrategyKind { random, maxmin, uncertainty, fixed_weights, rl_discrete, rl_continuous };

enum class UncertaintyMeasure { entropy, least_confidence };

struct StrategySpec {
  StrategyKind kind = StrategyKind::fixed_weights;
  std::string name = "flat";
  double alpha = 1.0, beta = 1.0, eta = 1.0;  // fixed_weights only

  bool uses_solver() const noexcept {
    return kind == StrategyKind::fixed_weights || kind == StrategyKind::rl_discrete ||
           kind == StrategyKind::rl_continuous;
  }
  bool is_rl() const noexcept { return kind == StrategyKind::rl_discrete || kind == StrategyKind::rl_continuous; }
};

// Names follow the ablation rows: rep, div, amb, pairwise sums, all/flat, plus
// the baselines and the two RL controllers.
inline StrategySpec parse_strategy(std::string name) {
  std::erase(name, ' ');
  auto fixed = [&](double a, double b, double e) {
    return StrategySpec{StrategyKind::fixed_weights, name, a, b, e};
  };
  if (name == "random") return {StrategyKind::random, name};
  if (name == "maxmin") return {StrategyKind::maxmin, name};
  if (name == "uncertainty") return {StrategyKind::uncertainty, name};
  if (name == "rl-d") return {StrategyKind::rl_discrete, name};
  if (name == "rl-c") return {StrategyKind::rl_continuous, name};
  if (name == "rep") return fixed(0, 0, 1);
  if (name == "div") return fixed(1, 0, 0);
  if (name == "amb") return fixed(0, 1, 0);
  if (name == "rep+div" || name == "div+rep") return fixed(1, 0, 1);
  if (name == "rep+amb" || name == "amb+rep") return fixed(0, 1, 1);
  if (name == "div+amb" || name == "amb+div") return fixed(1, 1, 0);
  if (name == "all" || name == "flat") return fixed(1, 1, 1);
  if (name == "fixed") return fixed(1, 1, 1);  // caller supplies the weights
  throw ParameterError("unknown strategy '" + name + "'");
}

inline std::vector<std::string> known_strategies() {
  return {"random", "maxmin", "uncertainty", "rep", "div", "amb", "rep+div",
          "rep+amb", "div+amb", "flat", "rl-d", "rl-c"};
}

inline Selection random_select(std::span<const std::size_t> candidates, std::size_t B, std::uint64_t seed) {
  if (B < 1) throw ParameterError("random_select: B must be >= 1");
  if (candidates.empty()) throw PoolExhausted();
  Rng rng(seed);
  Selection sel;
  for (auto pos : rng.sample_without_replacement(candidates.size(), B)) sel.indices.push_back(candidates[pos]);
  sel.pool_exhausted = candidates.size() <= B;
  return sel;
}

// Greedy farthest-first: each round takes the candidate whose distance to the
// nearest labeled or already-picked sample is largest, ties to the lower index.
inline Selection maxmin_select(const Matrix& features, std::span<const std::size_t> labeled,
                               std::span<const std::size_t> candidates, std::size_t B) {
  if (B < 1) throw ParameterError("maxmin_select: B must be >= 1");
  if (labeled.empty()) throw ParameterError("maxmin_select: needs at least one labeled sample");
  if (candidates.empty()) throw PoolExhausted();
  const std::size_t m = candidates.size();
  std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < m; ++c)
    for (auto l : labeled) nearest[c] = std::min(nearest[c], squared_distance(features.row(candidates[c]), features.row(l)));
  std::vector<bool> taken(m, false);
  Selection sel;
  const std::size_t rounds = std::min(B, m);
  for (std::size_t r = 0; r < rounds; ++r) {
    std::size_t best = m;
    for (std::size_t c = 0; c < m; ++c) {
      if (taken[c]) continue;
      if (best == m || nearest[c] > nearest[best] ||
          (nearest[c] == nearest[best] && candidates[c] < candidates[best]))
        best = c;
    }
    taken[best] = true;
    sel.indices.push_back(candidates[best]);
    for (std::size_t c = 0; c < m; ++c)
      if (!taken[c])
        nearest[c] = std::min(nearest[c], squared_distance(features.row(candidates[c]), features.row(candidates[best])));
  }
  sel.pool_exhausted = m <= B;
  return sel;
}

inline double row_entropy(std::span<const double> row) {
  double h = 0.0;
  for (double v : row) h -= xlogx(v);
  return h;
}

// The B candidates with the most ambiguous score rows.
inline Selection uncertainty_select(const Matrix& F, std::span<const std::size_t> candidate_ids, std::size_t B,
                                    UncertaintyMeasure measure = UncertaintyMeasure::entropy) {
  if (B < 1) throw ParameterError("uncertainty_select: B must be >= 1");
  if (F.rows() != candidate_ids.size()) throw ShapeError("uncertainty_select: F rows do not match candidates");
  if (F.rows() == 0) throw PoolExhausted();
  const std::size_t m = F.rows();
  std::vector<double> score(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = F.row(i);
    score[i] = measure == UncertaintyMeasure::entropy ? row_entropy(row)
                                                      : 1.0 - *std::max_element(row.begin(), row.end());
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return candidate_ids[a] < candidate_ids[b];
  });
  Selection sel;
  for (std::size_t r = 0; r < std::min(B, m); ++r) sel.indices.push_back(candidate_ids[order[r]]);
  sel.pool_exhausted = m <= B;
  return sel;
}

struct SolverSelection {
  Selection selection;
  MembershipVector membership;
};

// Display from the objective with constant weights.
inline SolverSelection fixed_weight_select(const Matrix& C, const Matrix& D, const Matrix& F,
                                           const CriterionWeights& w, std::uint64_t seed, const SolverOptions& opt,
                                           std::vector<std::size_t> candidate_ids, std::size_t B) {
  SolverSelection out;
  out.membership = solve_fixed_point(C, D, F, w, seed, opt, std::move(candidate_ids));
  out.selection = select_display(out.membership, B);
  return out;
}

}  // namespace frugal
