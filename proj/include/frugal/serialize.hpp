#pragma once

// JSON forms of configs, records, datasets and session snapshots.

#include <sstream>
#include <string>

#include "json.hpp"

#include "frugal/al_loop.hpp"

namespace frugal {

using json = nlohmann::json;

// A config value that could not be accepted; `field` is a JSON-pointer-like
// path such as "classifier.lr".
struct ConfigError : ParameterError {
  ConfigError(std::string field, const std::string& what)
      : ParameterError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline json weights_to_json(const CriterionWeights& w) {
  json j{{"alpha", w.alpha}, {"beta", w.beta}, {"eta", w.eta}};
  j["gamma"] = w.gamma.automatic ? json("auto") : json(w.gamma.value);
  return j;
}

namespace detail {

inline GammaPolicy gamma_from_json(const json& v, const std::string& field) {
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return GammaPolicy::auto_scaled();
    throw ConfigError(field, "expected \"auto\" or a positive number");
  }
  if (v.is_number()) {
    const double g = v.get<double>();
    if (!(g > 0.0)) throw ConfigError(field, "gamma must be positive");
    return GammaPolicy::fixed(g);
  }
  throw ConfigError(field, "expected \"auto\" or a positive number");
}

template <typename T>
T field_as(const json& obj, const char* key, const std::string& prefix) {
  const auto& v = obj.at(key);
  const std::string path = prefix.empty() ? key : prefix + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
      throw ConfigError(path, "expected a non-negative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
  } else {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
  }
  return v.get<T>();
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(prefix.empty() ? it.key() : prefix + "." + it.key(), "unknown field");
  }
}

}  // namespace detail

inline json config_to_json(const RunConfig& c) {
  json j;
  j["T"] = c.T;
  j["B"] = c.B;
  j["K"] = c.clusters();
  j["strategy"] = c.strategy.name;
  if (c.strategy.kind == StrategyKind::fixed_weights)
    j["weights"] = {{"alpha", c.strategy.alpha}, {"beta", c.strategy.beta}, {"eta", c.strategy.eta}};
  j["gamma"] = c.gamma.automatic ? json("auto") : json(c.gamma.value);
  j["epsilon"] = c.solver.epsilon;
  j["maxiter"] = c.solver.maxiter;
  j["relaxation"] = c.solver.relaxation == Relaxation::balanced ? "balanced" : "literal";
  j["holdout_frac"] = c.holdout_frac;
  j["rl_lr"] = c.rl_lr;
  j["rl_discount"] = c.rl_discount;
  j["recluster"] = c.recluster;
  j["uncertainty"] = c.uncertainty == UncertaintyMeasure::entropy ? "entropy" : "least-confidence";
  j["classifier"] = {{"lr", c.classifier.lr}, {"epochs", c.classifier.epochs}, {"l2", c.classifier.l2}};
  j["seed"] = c.seed;
  return j;
}

// Applies the fields present in `j` on top of `base`.
inline RunConfig config_from_json(const json& j, RunConfig base = {}) {
  using detail::field_as;
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  detail::reject_unknown(j,
                         {"T", "B", "K", "strategy", "weights", "gamma", "epsilon", "maxiter", "relaxation",
                          "holdout_frac", "rl_lr", "rl_discount", "recluster", "uncertainty", "classifier", "seed"},
                         "");
  RunConfig c = std::move(base);
  if (j.contains("T")) c.T = field_as<std::size_t>(j, "T", "");
  if (j.contains("B")) c.B = field_as<std::size_t>(j, "B", "");
  if (j.contains("K")) c.K = field_as<std::size_t>(j, "K", "");
  if (j.contains("strategy")) {
    try {
      c.strategy = parse_strategy(field_as<std::string>(j, "strategy", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const ParameterError& e) {
      throw ConfigError("strategy", e.what());
    }
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (!w.is_object()) throw ConfigError("weights", "expected an object");
    if (c.strategy.kind != StrategyKind::fixed_weights)
      throw ConfigError("weights", "only valid with fixed-weight strategies");
    detail::reject_unknown(w, {"alpha", "beta", "eta"}, "weights");
    if (w.contains("alpha")) c.strategy.alpha = field_as<double>(w, "alpha", "weights");
    if (w.contains("beta")) c.strategy.beta = field_as<double>(w, "beta", "weights");
    if (w.contains("eta")) c.strategy.eta = field_as<double>(w, "eta", "weights");
    for (double v : {c.strategy.alpha, c.strategy.beta, c.strategy.eta})
      if (!(v >= 0.0)) throw ConfigError("weights", "weights must be >= 0");
  }
  if (j.contains("gamma")) c.gamma = detail::gamma_from_json(j.at("gamma"), "gamma");
  if (j.contains("epsilon")) c.solver.epsilon = field_as<double>(j, "epsilon", "");
  if (j.contains("maxiter")) c.solver.maxiter = field_as<std::size_t>(j, "maxiter", "");
  if (j.contains("relaxation")) {
    const auto r = field_as<std::string>(j, "relaxation", "");
    if (r == "balanced") c.solver.relaxation = Relaxation::balanced;
    else if (r == "literal") c.solver.relaxation = Relaxation::literal;
    else throw ConfigError("relaxation", "expected \"balanced\" or \"literal\"");
  }
  if (j.contains("holdout_frac")) c.holdout_frac = field_as<double>(j, "holdout_frac", "");
  if (j.contains("rl_lr")) c.rl_lr = field_as<double>(j, "rl_lr", "");
  if (j.contains("rl_discount")) c.rl_discount = field_as<double>(j, "rl_discount", "");
  if (j.contains("recluster")) c.recluster = field_as<bool>(j, "recluster", "");
  if (j.contains("uncertainty")) {
    const auto u = field_as<std::string>(j, "uncertainty", "");
    if (u == "entropy") c.uncertainty = UncertaintyMeasure::entropy;
    else if (u == "least-confidence") c.uncertainty = UncertaintyMeasure::least_confidence;
    else throw ConfigError("uncertainty", "expected \"entropy\" or \"least-confidence\"");
  }
  if (j.contains("classifier")) {
    const auto& cl = j.at("classifier");
    if (!cl.is_object()) throw ConfigError("classifier", "expected an object");
    detail::reject_unknown(cl, {"lr", "epochs", "l2"}, "classifier");
    if (cl.contains("lr")) c.classifier.lr = field_as<double>(cl, "lr", "classifier");
    if (cl.contains("epochs")) c.classifier.epochs = field_as<std::size_t>(cl, "epochs", "classifier");
    if (cl.contains("l2")) c.classifier.l2 = field_as<double>(cl, "l2", "classifier");
  }
  if (j.contains("seed")) c.seed = field_as<std::uint64_t>(j, "seed", "");
  return c;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(config_to_json(c).dump())); }

inline json record_to_json(const IterationRecord& r) {
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json j;
  j["t"] = r.t;
  j["labeled_count"] = r.labeled_count;
  j["sampling_pct"] = r.sampling_pct;
  j["test_eer"] = opt(r.test_eer);
  j["test_accuracy"] = opt(r.test_accuracy);
  j["reward"] = opt(r.reward);
  j["action_id"] = opt(r.action_id);
  j["explored"] = r.explored;
  if (r.weights) {
    j["alpha"] = r.weights->alpha;
    j["beta"] = r.weights->beta;
    j["eta"] = r.weights->eta;
  } else {
    j["alpha"] = j["beta"] = j["eta"] = nullptr;
  }
  j["q"] = r.q;
  j["solver_iterations"] = r.solver_iterations;
  j["solver_residual"] = r.solver_residual;
  j["solver_converged"] = r.solver_converged;
  j["next_display_size"] = r.next_display_size;
  return j;
}

inline IterationRecord record_from_json(const json& j, GammaPolicy gamma = GammaPolicy::auto_scaled()) {
  auto opt_d = [&](const char* k) -> std::optional<double> {
    return j.at(k).is_null() ? std::nullopt : std::optional<double>(j.at(k).get<double>());
  };
  IterationRecord r;
  r.t = j.at("t").get<std::size_t>();
  r.labeled_count = j.at("labeled_count").get<std::size_t>();
  r.sampling_pct = j.at("sampling_pct").get<double>();
  r.test_eer = opt_d("test_eer");
  r.test_accuracy = opt_d("test_accuracy");
  r.reward = opt_d("reward");
  if (!j.at("action_id").is_null()) r.action_id = j.at("action_id").get<std::size_t>();
  r.explored = j.at("explored").get<bool>();
  if (!j.at("alpha").is_null())
    r.weights = CriterionWeights{j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("eta").get<double>(),
                                 gamma};
  r.q = j.at("q").get<std::vector<double>>();
  r.solver_iterations = j.at("solver_iterations").get<std::size_t>();
  r.solver_residual = j.at("solver_residual").get<double>();
  r.solver_converged = j.at("solver_converged").get<bool>();
  r.next_display_size = j.at("next_display_size").get<std::size_t>();
  return r;
}

// First line of every record stream.
inline json stream_header(const RunConfig& c, const json& extra = json::object()) {
  json j{{"type", "header"}, {"version", std::string(kVersion)}, {"config", config_to_json(c)},
         {"config_hash", config_hash(c)}};
  j["seeds"] = {{"master", c.seed},
                {"clustering", derive_seed(c.seed, stream::kClustering)},
                {"initial_display", derive_seed(c.seed, stream::kInitialDisplay)},
                {"rl", derive_seed(c.seed, stream::kRlInit)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

// Newline-delimited stream: header then one object per iteration.
inline std::string records_to_ndjson(const RunConfig& c, const std::vector<IterationRecord>& records,
                                     const json& extra = json::object()) {
  std::ostringstream out;
  out << stream_header(c, extra).dump() << '\n';
  for (const auto& r : records) {
    auto j = record_to_json(r);
    j["type"] = "iteration";
    out << j.dump() << '\n';
  }
  return out.str();
}

inline std::vector<IterationRecord> records_from_ndjson(std::istream& in) {
  std::vector<IterationRecord> out;
  std::string line;
  GammaPolicy gamma = GammaPolicy::auto_scaled();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    if (j.value("type", "") == "header") {
      if (j.contains("config") && j["config"].contains("gamma"))
        gamma = detail::gamma_from_json(j["config"]["gamma"], "gamma");
      continue;
    }
    out.push_back(record_from_json(j, gamma));
  }
  return out;
}

inline json dataset_to_json(const Dataset& ds) {
  json rows = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.features.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json j{{"ids", ds.ids}, {"features", rows}, {"nc", ds.nc}};
  if (ds.has_labels()) j["labels"] = ds.labels;
  return j;
}

// Accepts {"ids"?, "features": [[...]], "labels"?, "nc"?}.
inline Dataset dataset_from_json(const json& j, const std::string& field = "dataset") {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  if (!j.contains("features") || !j["features"].is_array() || j["features"].empty())
    throw ConfigError(field + ".features", "expected a non-empty array of rows");
  const auto& rows = j["features"];
  const std::size_t n = rows.size();
  if (!rows[0].is_array() || rows[0].empty()) throw ConfigError(field + ".features", "rows must be non-empty arrays");
  const std::size_t d = rows[0].size();
  Dataset ds;
  ds.features = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != d)
      throw ConfigError(field + ".features[" + std::to_string(i) + "]", "expected " + std::to_string(d) + " values");
    for (std::size_t k = 0; k < d; ++k) {
      if (!rows[i][k].is_number())
        throw ConfigError(field + ".features[" + std::to_string(i) + "]", "expected numbers");
      ds.features(i, k) = rows[i][k].get<double>();
    }
  }
  if (j.contains("ids")) {
    if (!j["ids"].is_array() || j["ids"].size() != n)
      throw ConfigError(field + ".ids", "expected " + std::to_string(n) + " ids");
    for (const auto& v : j["ids"]) ds.ids.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  } else {
    for (std::size_t i = 0; i < n; ++i) ds.ids.push_back(std::to_string(i));
  }
  int max_label = -1;
  if (j.contains("labels") && !j["labels"].is_null()) {
    if (!j["labels"].is_array() || j["labels"].size() != n)
      throw ConfigError(field + ".labels", "expected " + std::to_string(n) + " labels");
    for (const auto& v : j["labels"]) {
      if (!v.is_number_integer()) throw ConfigError(field + ".labels", "expected integers");
      ds.labels.push_back(v.get<int>());
      max_label = std::max(max_label, ds.labels.back());
    }
  }
  if (j.contains("nc")) {
    if (!j["nc"].is_number_integer()) throw ConfigError(field + ".nc", "expected an integer");
    ds.nc = j["nc"].get<int>();
  } else {
    if (max_label < 0) throw ConfigError(field + ".nc", "required when no labels are given");
    ds.nc = std::max(2, max_label + 1);
  }
  try {
    ds.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(field, e.what());
  }
  ds.warnings = ds.empty_class_warnings();
  return ds;
}

inline json qtable_to_json(const QTable& q) {
  json j{{"q", q.q}, {"seed", q.seed}, {"gamma_rl", q.gamma_rl}, {"delta", q.delta}};
  j["prev_action"] = q.prev_action ? json(*q.prev_action) : json(nullptr);
  return j;
}

inline QTable qtable_from_json(const json& j) {
  QTable q;
  q.q = j.at("q").get<std::vector<double>>();
  q.seed = j.at("seed").get<std::uint64_t>();
  q.gamma_rl = j.at("gamma_rl").get<double>();
  q.delta = j.at("delta").get<double>();
  if (!j.at("prev_action").is_null()) q.prev_action = j.at("prev_action").get<std::size_t>();
  return q;
}

inline json session_state_to_json(const SessionState& s) {
  json displays = json::array();
  for (std::size_t k = 0; k < s.pool.displays().size(); ++k)
    displays.push_back({{"display", s.pool.displays()[k]}, {"holdout", s.pool.holdouts()[k]}});
  json labeled = json::array();
  for (auto [i, y] : s.pool.labeled()) labeled.push_back({i, y});
  json pending = json::array();
  for (auto [i, y] : s.pending_labels) pending.push_back({i, y});
  json records = json::array();
  for (const auto& r : s.records) records.push_back(record_to_json(r));
  json j{{"pool_size", s.pool.pool_size()},
         {"iteration", s.pool.iteration()},
         {"displays", displays},
         {"labeled", labeled},
         {"pending_labels", pending},
         {"weights", weights_to_json(s.weights)},
         {"records", records},
         {"phase", phase_name(s.phase)}};
  j["qtable"] = s.qtable ? qtable_to_json(*s.qtable) : json(nullptr);
  return j;
}

inline SessionState session_state_from_json(const json& j) {
  SessionState s;
  s.pool = PoolState(j.at("pool_size").get<std::size_t>());
  for (const auto& d : j.at("displays"))
    s.pool.add_display(d.at("display").get<std::vector<std::size_t>>(), d.at("holdout").get<std::vector<std::size_t>>());
  LabelMap labeled;
  for (const auto& p : j.at("labeled")) labeled[p.at(0).get<std::size_t>()] = p.at(1).get<int>();
  s.pool.record_labels(labeled);
  for (std::size_t k = 0, n = j.at("iteration").get<std::size_t>(); k < n; ++k) s.pool.advance();
  for (const auto& p : j.at("pending_labels")) s.pending_labels[p.at(0).get<std::size_t>()] = p.at(1).get<int>();
  const auto& w = j.at("weights");
  s.weights.alpha = w.at("alpha").get<double>();
  s.weights.beta = w.at("beta").get<double>();
  s.weights.eta = w.at("eta").get<double>();
  s.weights.gamma = detail::gamma_from_json(w.at("gamma"), "weights.gamma");
  for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r, s.weights.gamma));
  if (!j.at("qtable").is_null()) s.qtable = qtable_from_json(j.at("qtable"));
  const auto phase = j.at("phase").get<std::string>();
  s.phase = phase == "finished" ? Phase::finished : Phase::awaiting_labels;
  return s;
}

}  // namespace frugal
