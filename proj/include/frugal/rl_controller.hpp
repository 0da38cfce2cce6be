#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "frugal/classifier.hpp"
#include "frugal/display_solver.hpp"

namespace frugal {

// Per-action factors or replacement values for (alpha, beta, eta).
struct WeightTriple {
  double alpha, beta, eta;
  friend bool operator==(const WeightTriple&, const WeightTriple&) = default;
};

inline constexpr double kWeightFloor = 1e-6;
inline constexpr double kWeightCap = 1e6;

class ActionSpace {
 public:
  enum class Mode { discrete, continuous };

  static ActionSpace discrete() {
    ActionSpace s(Mode::discrete);
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b)
        for (int e = 0; e <= 1; ++e)
          if (a + b + e > 0) s.actions_.push_back({double(a), double(b), double(e)});
    return s;
  }

  static ActionSpace continuous(double factor = 0.95) {
    ActionSpace s(Mode::continuous);
    const std::array<double, 3> f{1.0, factor, 1.0 / factor};
    for (double a : f)
      for (double b : f)
        for (double e : f) s.actions_.push_back({a, b, e});
    return s;
  }

  Mode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return actions_.size(); }
  const WeightTriple& operator[](std::size_t id) const { return actions_.at(id); }
  const std::vector<WeightTriple>& actions() const noexcept { return actions_; }

 private:
  explicit ActionSpace(Mode m) : mode_(m) {}
  Mode mode_;
  std::vector<WeightTriple> actions_;
};

// Stateless Q-learning table: one value per action.
struct QTable {
  std::vector<double> q;
  std::optional<std::size_t> prev_action;
  std::uint64_t seed = 0;
  double gamma_rl = 0.1;  // learning rate
  double delta = 0.9;     // discount
};

inline QTable init_qtable(const ActionSpace& space, std::uint64_t seed, double gamma_rl = 0.1, double delta = 0.9) {
  if (!(gamma_rl > 0.0 && gamma_rl <= 1.0)) throw ParameterError("rl: learning rate must be in (0, 1]");
  if (!(delta >= 0.0 && delta < 1.0)) throw ParameterError("rl: discount must be in [0, 1)");
  QTable t;
  t.seed = seed;
  t.gamma_rl = gamma_rl;
  t.delta = delta;
  Rng rng(derive_seed(seed, stream::kRlInit));
  t.q.resize(space.size());
  for (double& v : t.q) v = rng.uniform();
  return t;
}

// Q(a) <- (1 - lr) Q(a) + lr (r + delta max_a' Q(a')) on the previous action,
// with the max taken over the values before this update.
inline void update_qtable(QTable& table, double reward) {
  if (!table.prev_action) throw ParameterError("rl: update called before any action was taken");
  const double best = *std::max_element(table.q.begin(), table.q.end());
  double& q = table.q.at(*table.prev_action);
  q = (1.0 - table.gamma_rl) * q + table.gamma_rl * (reward + table.delta * best);
}

struct Choice {
  std::size_t action = 0;
  bool explored = false;
};

// Greedy action, ties to the lowest id.
inline std::size_t greedy_action(const QTable& table) {
  return static_cast<std::size_t>(std::max_element(table.q.begin(), table.q.end()) - table.q.begin());
}

// Explores with probability exp(-t). Draws come from a stream keyed by the
// table seed and t, so replaying an iteration replays its choice.
inline Choice choose_action(QTable& table, std::size_t t) {
  Rng rng(derive_seed(table.seed, stream::kRlChoose, t));
  Choice c;
  const double v = rng.uniform();
  if (v <= std::exp(-static_cast<double>(t))) {
    c.action = rng.below(table.q.size());
    c.explored = true;
  } else {
    c.action = greedy_action(table);
  }
  table.prev_action = c.action;
  return c;
}

inline CriterionWeights apply_action(const ActionSpace& space, std::size_t action, CriterionWeights w) {
  const auto& a = space[action];
  if (space.mode() == ActionSpace::Mode::discrete) {
    w.alpha = a.alpha;
    w.beta = a.beta;
    w.eta = a.eta;
  } else {
    w.alpha = std::clamp(w.alpha * a.alpha, kWeightFloor, kWeightCap);
    w.beta = std::clamp(w.beta * a.beta, kWeightFloor, kWeightCap);
    w.eta = std::clamp(w.eta * a.eta, kWeightFloor, kWeightCap);
  }
  return w;
}

// Plain holdout accuracy of the current model.
inline double reward_from_holdout(const SoftmaxModel& model, const Matrix& holdout_features,
                                  std::span<const int> holdout_truth) {
  if (holdout_features.rows() == 0) throw ParameterError("rl: holdout is empty");
  return accuracy(predict(model, holdout_features), holdout_truth);
}

}  // namespace frugal
