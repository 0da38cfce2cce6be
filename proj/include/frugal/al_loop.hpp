#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "frugal/classifier.hpp"
#include "frugal/clustering.hpp"
#include "frugal/data.hpp"
#include "frugal/display_solver.hpp"
#include "frugal/rl_controller.hpp"
#include "frugal/strategies.hpp"

namespace frugal {

struct RunConfig {
  std::size_t T = 10;
  std::size_t B = 16;
  std::size_t K = 0;  // 0 means K = B
  StrategySpec strategy = parse_strategy("flat");
  TrainerConfig classifier{};
  SolverOptions solver{};
  GammaPolicy gamma = GammaPolicy::auto_scaled();
  double holdout_frac = 0.1;
  double rl_lr = 0.1;
  double rl_discount = 0.9;
  bool recluster = false;
  UncertaintyMeasure uncertainty = UncertaintyMeasure::entropy;
  std::uint64_t seed = 0;

  std::size_t clusters() const noexcept { return K == 0 ? B : K; }

  // Throws ParameterError for invalid fields. Returns warnings for values
  // that were adjusted to fit a pool of the given size.
  std::vector<std::string> normalize_for_pool(std::size_t pool_size) {
    std::vector<std::string> warnings;
    if (T < 1) throw ParameterError("T must be >= 1");
    if (B < 1) throw ParameterError("B must be >= 1");
    if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw ParameterError("holdout_frac must be in [0, 1)");
    if (strategy.is_rl() && holdout_frac <= 0.0) throw ParameterError("holdout_frac must be > 0 for RL strategies");
    if (!(solver.epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
    if (solver.maxiter < 1) throw ParameterError("maxiter must be >= 1");
    if (!gamma.automatic && !(gamma.value > 0.0)) throw ParameterError("gamma must be 'auto' or a positive value");
    if (!(rl_lr > 0.0 && rl_lr <= 1.0)) throw ParameterError("rl_lr must be in (0, 1]");
    if (!(rl_discount >= 0.0 && rl_discount < 1.0)) throw ParameterError("rl_discount must be in [0, 1)");
    if (!(classifier.lr > 0.0) || !(classifier.l2 >= 0.0)) throw ParameterError("classifier lr must be > 0, l2 >= 0");
    if (pool_size == 0) throw ParameterError("pool is empty");
    if (B > pool_size) {
      warnings.push_back("B=" + std::to_string(B) + " exceeds pool size " + std::to_string(pool_size) + "; truncated");
      B = pool_size;
    }
    if (holdout_frac > 0.0 && B < 2) throw ParameterError("B must be >= 2 when a holdout is carved from each display");
    const std::size_t max_T = (pool_size + B - 1) / B;
    if (T > max_T) {
      warnings.push_back("T*B exceeds pool size; T truncated to " + std::to_string(max_T));
      T = max_T;
    }
    if (clusters() > pool_size) {
      warnings.push_back("K exceeds pool size; truncated");
      K = pool_size;
    }
    return warnings;
  }
};

struct IterationRecord {
  std::size_t t = 0;
  std::size_t labeled_count = 0;
  double sampling_pct = 0.0;
  std::optional<double> test_eer;
  std::optional<double> test_accuracy;
  std::optional<double> reward;
  std::optional<std::size_t> action_id;
  bool explored = false;
  std::optional<CriterionWeights> weights;
  std::vector<double> q;
  std::size_t solver_iterations = 0;
  double solver_residual = 0.0;
  bool solver_converged = false;
  std::size_t next_display_size = 0;
  double wall_time_s = 0.0;  // excluded from serialized streams
};

enum class Phase { awaiting_labels, computing, finished };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::awaiting_labels: return "awaiting-labels";
    case Phase::computing: return "computing";
    case Phase::finished: return "finished";
  }
  return "?";
}

// Everything about a session that changes between iterations.
struct SessionState {
  PoolState pool;
  LabelMap pending_labels;
  CriterionWeights weights;
  std::optional<QTable> qtable;
  std::vector<IterationRecord> records;
  Phase phase = Phase::awaiting_labels;
};

// One active-learning run as a resumable state machine. Each iteration waits
// for the labels of the pending display, then trains, updates the controller
// and computes the next display.
class Session {
 public:
  Session(RunConfig cfg, std::shared_ptr<const Dataset> pool, std::shared_ptr<const Dataset> test = nullptr)
      : cfg_(std::move(cfg)), pool_(std::move(pool)), test_(std::move(test)) {
    if (!pool_) throw ParameterError("session: no pool dataset");
    pool_->validate();
    if (test_) {
      test_->validate();
      if (test_->dims() != pool_->dims()) throw ParameterError("session: test set dimension differs from pool");
    }
    warnings_ = cfg_.normalize_for_pool(pool_->size());
    setup();
    state_.pool = PoolState(pool_->size());
    state_.weights = initial_weights();
    if (cfg_.strategy.is_rl())
      state_.qtable = init_qtable(space_, derive_seed(cfg_.seed, stream::kRlInit), cfg_.rl_lr, cfg_.rl_discount);
    Rng rng(derive_seed(cfg_.seed, stream::kInitialDisplay));
    auto d0 = rng.sample_without_replacement(pool_->size(), cfg_.B);
    add_display(std::move(d0), 0);
  }

  // Rebuilds a session from a snapshot of its state.
  Session(RunConfig cfg, std::shared_ptr<const Dataset> pool, std::shared_ptr<const Dataset> test,
          SessionState state)
      : cfg_(std::move(cfg)), pool_(std::move(pool)), test_(std::move(test)) {
    if (!pool_) throw ParameterError("session: no pool dataset");
    warnings_ = cfg_.normalize_for_pool(pool_->size());
    setup();
    state_ = std::move(state);
    for (auto [i, y] : state_.pending_labels) oracle_.submit(i, y);
  }

  const RunConfig& config() const noexcept { return cfg_; }
  const Dataset& pool() const noexcept { return *pool_; }
  const Dataset* test() const noexcept { return test_.get(); }
  const SessionState& state() const noexcept { return state_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  Phase phase() const noexcept { return state_.phase; }
  std::size_t t() const noexcept { return state_.records.size(); }
  const std::vector<IterationRecord>& records() const noexcept { return state_.records; }
  const ActionSpace& action_space() const noexcept { return space_; }

  const std::vector<std::size_t>& pending_display() const {
    if (state_.phase == Phase::finished) throw Error("session finished: no pending display");
    return state_.pool.displays().back();
  }

  // Accumulates one label for the pending display; resubmission overwrites.
  void submit(std::size_t index, int label) {
    if (state_.phase != Phase::awaiting_labels) throw ParameterError("session is not awaiting labels");
    const auto& d = pending_display();
    if (!std::binary_search(d.begin(), d.end(), index))
      throw ParameterError("sample " + pool_->ids.at(index) + " is not in the pending display");
    if (label < 0 || label >= pool_->nc)
      throw ParameterError("label " + std::to_string(label) + " outside [0, " + std::to_string(pool_->nc) + ")");
    oracle_.submit(index, label);
    state_.pending_labels[index] = label;
  }

  std::vector<std::size_t> missing_labels() const {
    if (state_.phase == Phase::finished) return {};
    auto r = reveal_labels(oracle_, pending_display());
    if (auto* w = std::get_if<AwaitingLabels>(&r)) return w->missing;
    return {};
  }

  bool ready() const { return state_.phase == Phase::awaiting_labels && missing_labels().empty(); }

  // Runs one iteration once every pending label is in. Returns its record.
  const IterationRecord& advance() {
    if (state_.phase != Phase::awaiting_labels) throw ParameterError("session is not awaiting labels");
    auto revealed = reveal_labels(oracle_, pending_display());
    if (std::holds_alternative<AwaitingLabels>(revealed))
      throw ParameterError(std::to_string(std::get<AwaitingLabels>(revealed).missing.size()) +
                           " labels still missing for the pending display");
    state_.phase = Phase::computing;
    try {
      iterate(std::get<LabelMap>(revealed));
    } catch (...) {
      state_.phase = Phase::awaiting_labels;
      throw;
    }
    return state_.records.back();
  }

 private:
  CriterionWeights initial_weights() const {
    CriterionWeights w;
    w.gamma = cfg_.gamma;
    if (cfg_.strategy.kind == StrategyKind::fixed_weights) {
      w.alpha = cfg_.strategy.alpha;
      w.beta = cfg_.strategy.beta;
      w.eta = cfg_.strategy.eta;
    }
    return w;
  }

  void setup() {
    oracle_ = Oracle::interactive();
    space_ = cfg_.strategy.kind == StrategyKind::rl_continuous ? ActionSpace::continuous() : ActionSpace::discrete();
    if (cfg_.strategy.uses_solver() && !cfg_.recluster) {
      clusters_ = kmeans(pool_->features, cfg_.clusters(), derive_seed(cfg_.seed, stream::kClustering));
      matrices_ = materialize(*clusters_, pool_->features);
    }
  }

  void add_display(std::vector<std::size_t> display, std::size_t t) {
    std::vector<std::size_t> holdout;
    if (cfg_.holdout_frac > 0.0 && !display.empty()) {
      const auto size = static_cast<std::size_t>(
          std::ceil(cfg_.holdout_frac * static_cast<double>(display.size()) - 1e-9));
      Rng rng(derive_seed(cfg_.seed, stream::kHoldout, t));
      for (auto pos : rng.sample_without_replacement(display.size(), std::max<std::size_t>(1, size)))
        holdout.push_back(display[pos]);
    }
    state_.pool.add_display(std::move(display), std::move(holdout));
  }

  void iterate(const LabelMap& labels) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t t = state_.records.size();
    auto& pool_state = state_.pool;
    pool_state.record_labels(labels);

    const auto train_rows = pool_state.training_indices();
    if (train_rows.empty()) throw TrainingError("no training samples outside the holdout");
    std::vector<int> train_y;
    train_y.reserve(train_rows.size());
    for (auto i : train_rows) train_y.push_back(pool_state.labeled().at(i));
    const auto model = train_softmax(pool_->features.select_rows(train_rows), train_y,
                                     static_cast<std::size_t>(pool_->nc), cfg_.classifier);

    IterationRecord rec;
    rec.t = t;
    rec.labeled_count = pool_state.labeled().size();
    rec.sampling_pct = 100.0 * static_cast<double>(rec.labeled_count) / static_cast<double>(pool_->size());
    if (test_ && test_->has_labels()) {
      const auto pred = predict(model, test_->features);
      rec.test_eer = eer(pred, test_->labels, static_cast<std::size_t>(pool_->nc));
      rec.test_accuracy = 1.0 - *rec.test_eer;
    }

    if (cfg_.strategy.is_rl()) {
      auto& q = *state_.qtable;
      if (t >= 1) {
        const auto& holdout = pool_state.holdouts()[t];
        std::vector<int> truth;
        for (auto i : holdout) truth.push_back(pool_state.labeled().at(i));
        rec.reward = reward_from_holdout(model, pool_->features.select_rows(holdout), truth);
        update_qtable(q, *rec.reward);
      }
      const auto choice = choose_action(q, t);
      state_.weights = apply_action(space_, choice.action, state_.weights);
      rec.action_id = choice.action;
      rec.explored = choice.explored;
      rec.q = q.q;
    }
    if (cfg_.strategy.uses_solver()) rec.weights = state_.weights;

    const auto candidates = pool_state.candidates();
    bool exhausted = candidates.empty();
    if (!exhausted) {
      auto sel = select_next(model, candidates, t, rec);
      rec.next_display_size = sel.indices.size();
      add_display(std::move(sel.indices), t + 1);
    }
    pool_state.advance();
    oracle_.clear_submissions();
    state_.pending_labels.clear();
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state_.records.push_back(std::move(rec));
    state_.phase = (exhausted || state_.records.size() >= cfg_.T) ? Phase::finished : Phase::awaiting_labels;
  }

  Selection select_next(const SoftmaxModel& model, const std::vector<std::size_t>& candidates, std::size_t t,
                        IterationRecord& rec) {
    const auto& x = pool_->features;
    switch (cfg_.strategy.kind) {
      case StrategyKind::random:
        return random_select(candidates, cfg_.B, derive_seed(cfg_.seed, stream::kStrategy, t));
      case StrategyKind::maxmin: {
        std::vector<std::size_t> labeled;
        for (auto [i, y] : state_.pool.labeled()) labeled.push_back(i);
        return maxmin_select(x, labeled, candidates, cfg_.B);
      }
      case StrategyKind::uncertainty: {
        const auto scores = score_all(model, x.select_rows(candidates));
        return uncertainty_select(scores.F, candidates, cfg_.B, cfg_.uncertainty);
      }
      default: break;
    }
    const auto cand_x = x.select_rows(candidates);
    Matrix C, D;
    if (cfg_.recluster) {
      const auto K = std::min(cfg_.clusters(), candidates.size());
      const auto m = kmeans(cand_x, K, derive_seed(cfg_.seed, stream::kClustering, t));
      auto mats = materialize(m, cand_x);
      C = std::move(mats.C);
      D = std::move(mats.D);
    } else {
      C = matrices_->C.select_rows(candidates);
      D = matrices_->D.select_rows(candidates);
    }
    const auto scores = score_all(model, cand_x);
    auto out = fixed_weight_select(C, D, scores.F, state_.weights, derive_seed(cfg_.seed, stream::kSolver, t),
                                   cfg_.solver, candidates, cfg_.B);
    rec.solver_iterations = out.membership.iterations_used;
    rec.solver_residual = out.membership.final_residual;
    rec.solver_converged = out.membership.converged;
    return out.selection;
  }

  RunConfig cfg_;
  std::shared_ptr<const Dataset> pool_;
  std::shared_ptr<const Dataset> test_;
  std::vector<std::string> warnings_;
  ActionSpace space_ = ActionSpace::discrete();
  std::optional<ClusterModel> clusters_;
  std::optional<ClusterMatrices> matrices_;
  Oracle oracle_ = Oracle::interactive();
  SessionState state_;
};

struct RunResult {
  std::vector<IterationRecord> records;
  std::vector<std::string> warnings;
};

// Drives a session with a simulated oracle until it finishes.
inline RunResult run(const RunConfig& cfg, std::shared_ptr<const Dataset> pool, std::shared_ptr<const Dataset> test) {
  if (!pool->has_labels()) throw ParameterError("run: simulated oracle needs pool labels");
  Session session(cfg, pool, std::move(test));
  const auto oracle = Oracle::simulated(pool->labels);
  while (session.phase() == Phase::awaiting_labels) {
    auto revealed = reveal_labels(oracle, session.pending_display());
    for (auto [i, y] : std::get<LabelMap>(revealed)) session.submit(i, y);
    session.advance();
  }
  return {session.records(), session.warnings()};
}

// Test accuracy of one model trained on the whole labeled pool.
inline double supervised_reference(const Dataset& pool, const Dataset& test, const TrainerConfig& cfg) {
  const auto model = train_softmax(pool.features, pool.labels, static_cast<std::size_t>(pool.nc), cfg);
  return 1.0 - eer(predict(model, test.features), test.labels, static_cast<std::size_t>(pool.nc));
}

struct CurvePoint {
  std::size_t t = 0;
  double sampling_pct = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_eer = 0.0;
  double std_eer = 0.0;
  std::size_t runs = 0;
};

struct StrategyRow {
  std::string strategy;
  std::vector<std::vector<IterationRecord>> runs;  // one per seed
  std::vector<CurvePoint> curve;
};

struct Comparison {
  std::vector<std::uint64_t> seeds;
  std::vector<StrategyRow> rows;
  std::optional<double> supervised_accuracy;
};

namespace detail {

inline std::vector<CurvePoint> aggregate(const std::vector<std::vector<IterationRecord>>& runs) {
  std::size_t horizon = 0;
  for (const auto& r : runs) horizon = std::max(horizon, r.size());
  std::vector<CurvePoint> curve;
  for (std::size_t t = 0; t < horizon; ++t) {
    CurvePoint p;
    p.t = t;
    double sa = 0, sa2 = 0, se = 0, se2 = 0, sp = 0;
    for (const auto& r : runs) {
      if (t >= r.size() || !r[t].test_accuracy) continue;
      const double a = *r[t].test_accuracy, e = *r[t].test_eer;
      sa += a;
      sa2 += a * a;
      se += e;
      se2 += e * e;
      sp += r[t].sampling_pct;
      ++p.runs;
    }
    if (p.runs == 0) continue;
    const double n = static_cast<double>(p.runs);
    p.mean_accuracy = sa / n;
    p.mean_eer = se / n;
    p.sampling_pct = sp / n;
    // Population standard deviation across seeds.
    p.std_accuracy = std::sqrt(std::max(0.0, sa2 / n - p.mean_accuracy * p.mean_accuracy));
    p.std_eer = std::sqrt(std::max(0.0, se2 / n - p.mean_eer * p.mean_eer));
    curve.push_back(p);
  }
  return curve;
}

}  // namespace detail

// Runs every (config, seed) cell, in parallel across hardware threads. Each
// config's own seed field is replaced by the cell's seed.
inline Comparison compare(const std::vector<RunConfig>& configs, std::shared_ptr<const Dataset> pool,
                          std::shared_ptr<const Dataset> test, const std::vector<std::uint64_t>& seeds,
                          bool include_supervised = false, std::size_t threads = 0) {
  if (configs.empty()) throw ParameterError("compare: no strategies");
  if (seeds.empty()) throw ParameterError("compare: no seeds");
  Comparison out;
  out.seeds = seeds;
  out.rows.resize(configs.size());
  const std::size_t cells = configs.size() * seeds.size();
  std::vector<std::vector<IterationRecord>> results(cells);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < cells;) {
      RunConfig cfg = configs[c / seeds.size()];
      cfg.seed = seeds[c % seeds.size()];
      results[c] = run(cfg, pool, test).records;
    }
  };
  std::vector<std::future<void>> jobs;
  for (std::size_t k = 0; k < threads; ++k) jobs.push_back(std::async(std::launch::async, worker));
  for (auto& j : jobs) j.get();

  for (std::size_t s = 0; s < configs.size(); ++s) {
    auto& row = out.rows[s];
    row.strategy = configs[s].strategy.name;
    for (std::size_t k = 0; k < seeds.size(); ++k) row.runs.push_back(std::move(results[s * seeds.size() + k]));
    row.curve = detail::aggregate(row.runs);
  }
  if (include_supervised && test) out.supervised_accuracy = supervised_reference(*pool, *test, configs.front().classifier);
  return out;
}

}  // namespace frugal
