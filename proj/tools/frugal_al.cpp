// frugal_al: dataset generation, benchmark runs, strategy comparisons and the
// labeling service.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "frugal/frugal.hpp"
#include "frugal/service.hpp"

namespace fs = std::filesystem;
using namespace frugal;

namespace {

constexpr int kExitArgs = 2;

struct Inputs {
  std::string dataset, test_dataset, config_file, out;
  double split_frac = 0.5;
  MixtureParams mix{4, 500, 2, 0.1, 0.1, 7};
};

struct RunFlags {
  std::string strategy = "flat";
  std::size_t T = 10, B = 16, K = 0;
  std::uint64_t seed = 0;
  std::string gamma = "auto";
  double epsilon = 1e-6, rl_lr = 0.1, rl_discount = 0.9, holdout_frac = 0.1;
  std::size_t maxiter = 100;
  double alpha = 1, beta = 1, eta = 1;
};

struct Resolved {
  RunConfig cfg;
  std::shared_ptr<const Dataset> pool, test;
  json source;  // where the data came from
};

void add_generator_flags(CLI::App* app, Inputs& in, const std::string& seed_flag = "--gen-seed") {
  app->add_option("--nc", in.mix.nc, "classes of the synthetic mixture")->check(CLI::Range(2, 1000));
  app->add_option("--per-class", in.mix.per_class, "samples per class")->check(CLI::PositiveNumber);
  app->add_option("--d", in.mix.d, "feature dimension")->check(CLI::PositiveNumber);
  app->add_option("--spread", in.mix.spread, "per-class standard deviation")->check(CLI::PositiveNumber);
  app->add_option("--label-noise", in.mix.label_noise, "share of labels replaced by another class")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option(seed_flag, in.mix.seed, "generator and split seed");
  app->add_option("--split-frac", in.split_frac, "test share when splitting one dataset")
      ->check(CLI::Range(0.0, 1.0));
}

void add_run_flags(CLI::App* app, Inputs& in, RunFlags& f) {
  app->add_option("--dataset", in.dataset, "pool CSV (id,f0..,label); synthetic mixture when absent");
  app->add_option("--test-dataset", in.test_dataset, "test CSV; the pool is split when absent");
  app->add_option("--config", in.config_file, "JSON run config; flags override its fields");
  app->add_option("--out", in.out, "output directory (default $FRUGAL_AL_OUT or ./out)");
  app->add_option("--T", f.T, "iterations")->check(CLI::PositiveNumber);
  app->add_option("--B", f.B, "display size")->check(CLI::PositiveNumber);
  app->add_option("--K", f.K, "clusters (0 means B)");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--gamma", f.gamma, "auto or a positive value");
  app->add_option("--epsilon", f.epsilon, "solver L1 tolerance")->check(CLI::PositiveNumber);
  app->add_option("--maxiter", f.maxiter, "solver iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--rl-lr", f.rl_lr, "Q-learning rate");
  app->add_option("--rl-discount", f.rl_discount, "Q-learning discount");
  app->add_option("--holdout-frac", f.holdout_frac, "share of each display kept for the reward");
  app->add_option("--alpha", f.alpha, "diversity weight for --strategy fixed");
  app->add_option("--beta", f.beta, "ambiguity weight for --strategy fixed");
  app->add_option("--eta", f.eta, "representativity weight for --strategy fixed");
  app->add_flag("--recluster", "re-cluster the candidates every iteration");
  add_generator_flags(app, in);
}

bool given(const CLI::App* app, const char* name) { return app->count(name) > 0; }

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path, "cannot open config file");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.byte), e.what());
  }
}

RunConfig resolve_config(const CLI::App* app, const Inputs& in, const RunFlags& f) {
  RunConfig cfg;
  if (!in.config_file.empty()) cfg = config_from_json(read_json_file(in.config_file));
  json o = json::object();
  if (given(app, "--strategy")) o["strategy"] = f.strategy;
  if (given(app, "--T")) o["T"] = f.T;
  if (given(app, "--B")) o["B"] = f.B;
  if (given(app, "--K")) o["K"] = f.K;
  if (given(app, "--seed")) o["seed"] = f.seed;
  if (given(app, "--gamma")) {
    if (f.gamma == "auto") {
      o["gamma"] = "auto";
    } else {
      try {
        std::size_t used = 0;
        o["gamma"] = std::stod(f.gamma, &used);
        if (used != f.gamma.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw ConfigError("--gamma", "expected 'auto' or a number");
      }
    }
  }
  if (given(app, "--epsilon")) o["epsilon"] = f.epsilon;
  if (given(app, "--maxiter")) o["maxiter"] = f.maxiter;
  if (given(app, "--rl-lr")) o["rl_lr"] = f.rl_lr;
  if (given(app, "--rl-discount")) o["rl_discount"] = f.rl_discount;
  if (given(app, "--holdout-frac")) o["holdout_frac"] = f.holdout_frac;
  if (given(app, "--recluster")) o["recluster"] = true;
  if (given(app, "--alpha") || given(app, "--beta") || given(app, "--eta"))
    o["weights"] = {{"alpha", f.alpha}, {"beta", f.beta}, {"eta", f.eta}};
  return config_from_json(o, cfg);
}

std::string file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return hex64(fnv1a64(s.str()));
}

json mixture_json(const MixtureParams& p) {
  return {{"nc", p.nc}, {"per_class", p.per_class}, {"d", p.d}, {"spread", p.spread},
          {"label_noise", p.label_noise}, {"seed", p.seed}};
}

Resolved load_inputs(const Inputs& in) {
  Resolved r;
  if (in.dataset.empty()) {
    if (!in.test_dataset.empty()) throw ParameterError("--test-dataset needs --dataset");
    auto [train, test] = split_dataset(generate_gaussian_mixture(in.mix), in.split_frac, in.mix.seed);
    r.pool = std::make_shared<Dataset>(std::move(train));
    r.test = std::make_shared<Dataset>(std::move(test));
    r.source = {{"generator", mixture_json(in.mix)}, {"split_frac", in.split_frac}};
    return r;
  }
  auto pool = load_csv(in.dataset);
  r.source = {{"dataset", in.dataset}, {"dataset_digest", file_digest(in.dataset)}};
  if (in.test_dataset.empty()) {
    auto [train, test] = split_dataset(pool, in.split_frac, in.mix.seed);
    r.pool = std::make_shared<Dataset>(std::move(train));
    r.test = std::make_shared<Dataset>(std::move(test));
    r.source["split_frac"] = in.split_frac;
    r.source["split_seed"] = in.mix.seed;
  } else {
    auto test = load_csv(in.test_dataset);
    if (test.nc != pool.nc) {
      const int nc = std::max(test.nc, pool.nc);
      pool.nc = test.nc = nc;
    }
    r.pool = std::make_shared<Dataset>(std::move(pool));
    r.test = std::make_shared<Dataset>(std::move(test));
    r.source["test_dataset"] = in.test_dataset;
    r.source["test_digest"] = file_digest(in.test_dataset);
  }
  return r;
}

fs::path output_dir(const Inputs& in) {
  fs::path dir = in.out;
  if (dir.empty()) {
    const char* env = std::getenv("FRUGAL_AL_OUT");
    dir = env && *env ? env : "out";
  }
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

std::string num(double v) { return detail::format_double(v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string header_comment(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// --- gen -------------------------------------------------------------------

int cmd_gen(const Inputs& in) {
  const auto dir = output_dir(in);
  json manifest{{"version", std::string(kVersion)}, {"generator", mixture_json(in.mix)}, {"split_frac", in.split_frac}};
  const std::string hash = hex64(fnv1a64(manifest.dump()));
  manifest["config_hash"] = hash;
  auto [train, test] = split_dataset(generate_gaussian_mixture(in.mix), in.split_frac, in.mix.seed);
  write_csv((dir / "train.csv").string(), train, "config_hash=" + hash);
  write_csv((dir / "test.csv").string(), test, "config_hash=" + hash);
  manifest["files"] = {{"train", "train.csv"}, {"test", "test.csv"}};
  manifest["rows"] = {{"train", train.size()}, {"test", test.size()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << train.size() << " train and " << test.size() << " test rows to " << dir.string() << '\n';
  return 0;
}

// --- run -------------------------------------------------------------------

std::string summary_csv(const std::vector<IterationRecord>& records, const std::string& hash) {
  std::string out = header_comment(hash);
  out += "t,labeled,sampling_pct,test_accuracy,test_eer,reward,action_id,explored,alpha,beta,eta,"
         "solver_iterations,solver_residual,solver_converged,next_display_size\n";
  for (const auto& r : records) {
    out += std::to_string(r.t) + ',' + std::to_string(r.labeled_count) + ',' + num(r.sampling_pct) + ',' +
           opt_num(r.test_accuracy) + ',' + opt_num(r.test_eer) + ',' + opt_num(r.reward) + ',' +
           (r.action_id ? std::to_string(*r.action_id) : "") + ',' + (r.explored ? "1" : "0") + ',';
    if (r.weights)
      out += num(r.weights->alpha) + ',' + num(r.weights->beta) + ',' + num(r.weights->eta) + ',';
    else
      out += ",,,";
    out += std::to_string(r.solver_iterations) + ',' + num(r.solver_residual) + ',' +
           (r.solver_converged ? "1" : "0") + ',' + std::to_string(r.next_display_size) + '\n';
  }
  return out;
}

int cmd_run(const CLI::App* app, const Inputs& in, const RunFlags& f) {
  const auto cfg = resolve_config(app, in, f);
  const auto data = load_inputs(in);
  const auto dir = output_dir(in);
  auto result = run(cfg, data.pool, data.test);
  print_warnings(data.pool->warnings);
  print_warnings(result.warnings);
  json resolved{{"config", config_to_json(cfg)}, {"data", data.source}};
  const std::string hash = hex64(fnv1a64(resolved.dump()));
  resolved["config_hash"] = hash;
  json extra{{"resolved_hash", hash}, {"data", data.source}, {"warnings", result.warnings}};
  write_file(dir / "records.ndjson", records_to_ndjson(cfg, result.records, extra));
  write_file(dir / "summary.csv", summary_csv(result.records, hash));
  write_file(dir / "config.json", resolved.dump(2) + "\n");
  const auto& last = result.records.back();
  std::cout << cfg.strategy.name << ": " << result.records.size() << " iterations, final accuracy "
            << (last.test_accuracy ? pct(*last.test_accuracy) : std::string("n/a")) << "% at "
            << num(last.sampling_pct) << "% sampling\n";
  return 0;
}

// --- compare ---------------------------------------------------------------

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') == std::string::npos) {
    const auto n = std::stoull(text);
    if (n == 0) throw ParameterError("--seeds must be >= 1");
    for (std::uint64_t k = 0; k < n; ++k) seeds.push_back(base + k);
    return seeds;
  }
  std::stringstream s(text);
  for (std::string tok; std::getline(s, tok, ',');)
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  if (seeds.empty()) throw ParameterError("--seeds lists no seed");
  return seeds;
}

int cmd_compare(const CLI::App* app, const Inputs& in, const RunFlags& f, const std::vector<std::string>& names,
                const std::string& seeds_text, bool include_supervised, const std::string& metric) {
  if (names.empty()) throw ConfigError("--strategies", "empty strategy list");
  const auto base = resolve_config(app, in, f);
  const auto seeds = parse_seeds(seeds_text, base.seed);
  std::vector<RunConfig> configs;
  json names_json = json::array();
  for (const auto& n : names) {
    auto c = base;
    c.strategy = parse_strategy(n);
    if (c.strategy.kind == StrategyKind::fixed_weights && c.strategy.name == "fixed") c.strategy = base.strategy;
    configs.push_back(c);
    names_json.push_back(c.strategy.name);
  }
  const auto data = load_inputs(in);
  const auto dir = output_dir(in);
  print_warnings(data.pool->warnings);
  {
    auto probe = base;
    print_warnings(probe.normalize_for_pool(data.pool->size()));
  }
  const auto cmp = compare(configs, data.pool, data.test, seeds, include_supervised);

  json resolved{{"config", config_to_json(base)}, {"strategies", names_json}, {"seeds", seeds},
                {"include_supervised", include_supervised}, {"metric", metric}, {"data", data.source}};
  const std::string hash = hex64(fnv1a64(resolved.dump()));
  resolved["config_hash"] = hash;
  const bool use_eer = metric == "eer";

  std::size_t horizon = 0;
  for (const auto& row : cmp.rows) horizon = std::max(horizon, row.curve.size());
  auto grid = [&](bool spread) {
    std::string out = header_comment(hash) + "strategy";
    for (std::size_t t = 1; t < horizon; ++t) out += ",t" + std::to_string(t);
    out += "\nsamp%";
    const auto& ref = cmp.rows.front().curve;
    for (std::size_t t = 1; t < horizon; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", t < ref.size() ? ref[t].sampling_pct : 0.0);
      out += std::string(",") + buf;
    }
    out += '\n';
    for (const auto& row : cmp.rows) {
      out += row.strategy;
      for (std::size_t t = 1; t < horizon; ++t) {
        out += ',';
        if (t >= row.curve.size()) continue;
        const auto& p = row.curve[t];
        out += pct(spread ? (use_eer ? p.std_eer : p.std_accuracy) : (use_eer ? p.mean_eer : p.mean_accuracy));
      }
      out += '\n';
    }
    if (cmp.supervised_accuracy) {
      out += "supervised";
      const double v = spread ? 0.0 : (use_eer ? 1.0 - *cmp.supervised_accuracy : *cmp.supervised_accuracy);
      for (std::size_t t = 1; t < horizon; ++t) out += ',' + pct(v);
      out += '\n';
    }
    return out;
  };
  write_file(dir / "grid.csv", grid(false));
  write_file(dir / "grid_std.csv", grid(true));

  std::string curves = header_comment(hash) + "strategy,t,sampling_pct,mean_accuracy,std_accuracy,mean_eer,std_eer,runs\n";
  for (const auto& row : cmp.rows)
    for (const auto& p : row.curve)
      curves += row.strategy + ',' + std::to_string(p.t) + ',' + num(p.sampling_pct) + ',' + num(p.mean_accuracy) +
                ',' + num(p.std_accuracy) + ',' + num(p.mean_eer) + ',' + num(p.std_eer) + ',' +
                std::to_string(p.runs) + '\n';
  write_file(dir / "curves.csv", curves);

  std::string traj = header_comment(hash) + "strategy,seed,t,alpha,beta,eta,action_id,explored,reward,test_accuracy\n";
  for (const auto& row : cmp.rows)
    for (std::size_t k = 0; k < row.runs.size(); ++k)
      for (const auto& r : row.runs[k]) {
        traj += row.strategy + ',' + std::to_string(seeds[k]) + ',' + std::to_string(r.t) + ',';
        if (r.weights)
          traj += num(r.weights->alpha) + ',' + num(r.weights->beta) + ',' + num(r.weights->eta) + ',';
        else
          traj += ",,,";
        traj += (r.action_id ? std::to_string(*r.action_id) : "") + ',' + (r.explored ? "1" : "0") + ',' +
                opt_num(r.reward) + ',' + opt_num(r.test_accuracy) + '\n';
      }
  write_file(dir / "trajectories.csv", traj);
  write_file(dir / "config.json", resolved.dump(2) + "\n");
  std::cout << grid(false);
  return 0;
}

// --- serve -----------------------------------------------------------------

int cmd_serve(const std::string& host, int port, const std::string& state_dir, const std::string& static_dir) {
  LabelService service(state_dir);
  httplib::Server server;
  service.bind(server, static_dir);
  std::cout << "listening on http://" << host << ':' << port << std::endl;
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frugal active learning: display selection by entropic fixed point with Q-learned weights",
               "frugal_al"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.failure_message(CLI::FailureMessage::help);

  Inputs in;
  RunFlags flags;

  auto* gen = app.add_subcommand("gen", "write train/test CSVs from the synthetic mixture");
  gen->add_option("--out", in.out, "output directory (default $FRUGAL_AL_OUT or ./out)");
  add_generator_flags(gen, in, "--seed,--gen-seed");

  auto* run_cmd = app.add_subcommand("run", "one active-learning run with a simulated oracle");
  add_run_flags(run_cmd, in, flags);
  run_cmd->add_option("--strategy", flags.strategy, "random|maxmin|uncertainty|rep|div|amb|rep+div|rep+amb|div+amb|flat|fixed|rl-d|rl-c");

  std::vector<std::string> names{"rep", "div", "amb", "flat", "rl-d", "rl-c"};
  std::string seeds_text = "5", metric = "accuracy";
  bool include_supervised = false;
  auto* cmp = app.add_subcommand("compare", "strategy x seed grid");
  add_run_flags(cmp, in, flags);
  cmp->add_option("--strategies", names, "comma-separated strategy names")->delimiter(',')->expected(0, -1);
  cmp->add_option("--strategy", flags.strategy, "weights source for 'fixed' in --strategies");
  cmp->add_option("--seeds", seeds_text, "seed count (from --seed) or comma-separated seeds");
  cmp->add_flag("--include-supervised", include_supervised, "add a row trained on the whole labeled pool");
  cmp->add_option("--metric", metric, "grid values")->check(CLI::IsMember({"accuracy", "eer"}));

  std::string host = "127.0.0.1", state_dir, static_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP labeling service");
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "bind address");
  serve->add_option("--state-dir", state_dir, "directory for dataset and session snapshots");
  serve->add_option("--static-dir", static_dir, "frontend assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitArgs;
  }

  try {
    if (*gen) return cmd_gen(in);
    if (*run_cmd) return cmd_run(run_cmd, in, flags);
    if (*cmp) {
      if (cmp->count("--strategies") > 0) {
        std::erase(names, std::string{});
      }
      return cmd_compare(cmp, in, flags, names, seeds_text, include_supervised, metric);
    }
    if (*serve) return cmd_serve(host, port, state_dir, static_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.field() << ": " << e.what() << '\n';
    return kExitArgs;
  } catch (const IngestError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitArgs;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
