// Command-line front end: topology/trace generation, training, evaluation,
// baselines, the exact oracle and side-by-side comparison.
//
// Exit codes: 0 success, 1 runtime error, 2 configuration error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "edgesched/baselines.hpp"
#include "edgesched/harness.hpp"

namespace fs = std::filesystem;
using namespace edgesched;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (sectioned key = value)");
  cmd->add_option("--set", args.overrides, "Override a config key: section.key=value")->take_all();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Global seed");
}

Config load_config(const CommonArgs& args) {
  Config cfg = default_config();
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& o : args.overrides) cfg.set_override(o);
  // Validate hyperparameters up front so bad values fail before any work.
  hyper_from_config(cfg);
  return cfg;
}

std::uint64_t require_seed(const CommonArgs& args, const std::string& cmd) {
  if (!args.seed) throw ConfigError(cmd + ": --seed is required for stochastic commands");
  return *args.seed;
}

bool scenario_is_stochastic(const Config& cfg) { return !cfg.has("topology.nodes_file") || !cfg.has("trace.file"); }

void write_summary_row(const std::string& name, const std::vector<EpisodeRecord>& log, const fs::path& out) {
  write_summary({CompareRow{name, summarize(log), 1.0}}, out / "summary.csv");
  write_timing({CompareRow{name, summarize(log), 1.0}}, out / "timing.csv");
}

int cmd_gen_topology(const CommonArgs& args) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = cfg.has("topology.nodes_file") ? args.seed.value_or(0) : require_seed(args, "gen-topology");
  const Topology topo = topology_from_config(cfg, seed);
  fs::create_directories(args.out_dir);
  save_topology(topo, fs::path(args.out_dir) / "nodes.csv", fs::path(args.out_dir) / "edges.csv");
  for (const auto& w : topo.warnings()) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << topo.size() << " nodes and " << topo.edges().size() << " edges to " << args.out_dir << "\n";
  return 0;
}

int cmd_gen_trace(const CommonArgs& args, int episode) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, "gen-trace");
  const Scenario sc = scenario_from_config(cfg, seed);
  const Trace trace = sc.trace_for(seed, kEvalTraceStream, episode);
  fs::create_directories(args.out_dir);
  save_trace(trace, fs::path(args.out_dir) / "trace.csv");
  save_catalog(sc.catalog, fs::path(args.out_dir) / "catalog.csv");
  std::cout << "wrote " << trace.size() << " requests to " << (fs::path(args.out_dir) / "trace.csv").string() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& algo_name_arg) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, "train");
  const Algo algo = parse_algo(algo_name_arg);
  const Scenario sc = scenario_from_config(cfg, seed);
  const auto model = train(algo, sc.make_env(), sc.source(seed, kTrainTraceStream), hyper_from_config(cfg),
                           episodes_from_config(cfg, algo),
                           derive_seed(seed, kAgentStream, static_cast<std::uint64_t>(algo)));
  const fs::path out(args.out_dir);
  fs::create_directories(out / "curves");
  write_curve(model.curve, out / "curves" / (algo_name(algo) + ".csv"));
  save_trained(model, out / "models");
  std::cout << "trained " << algo_name(algo) << " for " << model.curve.size() << " episodes\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& algo_name_arg, const std::string& models_dir) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, "eval");
  const Algo algo = parse_algo(algo_name_arg);
  const Scenario sc = scenario_from_config(cfg, seed);
  const fs::path out(args.out_dir);
  const fs::path mdir = models_dir.empty() ? out / "models" : fs::path(models_dir);
  const nn::Mlp net = nn::load_model(mdir / (algo == Algo::kDqn ? "dqn_q.model" : "ppo_policy.model"));
  const auto env = sc.make_env();
  if (net.input_size() != static_cast<int>(env.observation_size()) ||
      net.output_size() != static_cast<int>(env.action_count())) {
    throw ConfigError("model shape does not match the configured scenario");
  }
  const Policy policy = network_argmax_policy(net);
  const auto log = evaluate_scheduler(algo_name(algo), sc, &policy, seed,
                                      static_cast<int>(cfg.integer("compare.eval_episodes")), 0,
                                      cfg.boolean("compare.timing"));
  fs::create_directories(out / "episodes");
  write_episode_log(log, out / "episodes" / (algo_name(algo) + ".csv"));
  write_summary_row(algo_name(algo), log, out);
  return 0;
}

int cmd_baseline(const CommonArgs& args, const std::string& scheduler) {
  if (scheduler != "greedy" && scheduler != "random") {
    throw ConfigError("baseline --scheduler must be greedy or random");
  }
  const Config cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, "baseline");
  const Scenario sc = scenario_from_config(cfg, seed);
  const auto log = evaluate_scheduler(scheduler, sc, nullptr, seed, static_cast<int>(cfg.integer("compare.eval_episodes")),
                                      0, cfg.boolean("compare.timing"));
  const fs::path out(args.out_dir);
  fs::create_directories(out / "episodes");
  write_episode_log(log, out / "episodes" / (scheduler + ".csv"));
  write_summary_row(scheduler, log, out);
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = scenario_is_stochastic(cfg) ? require_seed(args, "oracle") : args.seed.value_or(0);
  const Scenario sc = scenario_from_config(cfg, seed);
  const Trace trace = sc.trace_for(seed, kEvalTraceStream, 0);
  Environment env = sc.make_env();
  const auto max_states = static_cast<std::uint64_t>(cfg.integer("compare.oracle_max_states"));
  const auto res = oracle_optimal(env, trace, OracleOptions{max_states, true});
  const auto log = replay_actions(env, trace, res.actions, 0);

  const fs::path out(args.out_dir);
  fs::create_directories(out / "episodes");
  {
    csv::Writer w(out / "oracle.csv");
    w.row("requests", "cost", "states_expanded", "wall_seconds", "actions");
    std::string actions;
    for (std::size_t i = 0; i < res.actions.size(); ++i) actions += (i ? " " : "") + std::to_string(res.actions[i]);
    w.row(trace.size(), res.cost.str(), res.states, csv::format_double(res.seconds), actions);
  }
  write_episode_log(log, out / "episodes" / "oracle.csv");
  std::cout << "optimum " << res.cost << " over " << trace.size() << " requests (" << res.states << " states, "
            << res.seconds << " s)\n";
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, "compare");
  const auto result = run_compare(cfg, seed, fs::path(args.out_dir));
  for (const auto& r : result.rows) {
    std::cout << r.scheduler << ": mean_episode_cost=" << r.stats.mean_episode_cost
              << " acceptance=" << r.stats.acceptance_rate << " factor=" << r.factor_vs_best << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware serverless function placement on edge networks"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string algo = "dqn";
  std::string models_dir;
  std::string scheduler = "greedy";
  int trace_episode = 0;

  auto* gen_topology = app.add_subcommand("gen-topology", "Generate or normalize a topology (nodes.csv, edges.csv)");
  auto* gen_trace = app.add_subcommand("gen-trace", "Generate a request trace (trace.csv, catalog.csv)");
  auto* train_cmd = app.add_subcommand("train", "Train a DQN or PPO scheduler");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained scheduler");
  auto* baseline = app.add_subcommand("baseline", "Run the greedy or random scheduler");
  auto* oracle = app.add_subcommand("oracle", "Exact optimum on a small instance");
  auto* compare = app.add_subcommand("compare", "Evaluate several schedulers on identical traces");
  for (auto* cmd : {gen_topology, gen_trace, train_cmd, eval_cmd, baseline, oracle, compare}) add_common(cmd, common);
  gen_trace->add_option("--episode", trace_episode, "Evaluation episode index to draw");
  train_cmd->add_option("--algo", algo, "dqn or ppo");
  eval_cmd->add_option("--algo", algo, "dqn or ppo");
  eval_cmd->add_option("--models", models_dir, "Directory with trained models (default OUT/models)");
  baseline->add_option("--scheduler", scheduler, "greedy or random");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_topology) return cmd_gen_topology(common);
    if (*gen_trace) return cmd_gen_trace(common, trace_episode);
    if (*train_cmd) return cmd_train(common, algo);
    if (*eval_cmd) return cmd_eval(common, algo, models_dir);
    if (*baseline) return cmd_baseline(common, scheduler);
    if (*oracle) return cmd_oracle(common);
    if (*compare) return cmd_compare(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
