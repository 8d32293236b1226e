#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgesched/baselines.hpp"
#include "edgesched/config.hpp"
#include "edgesched/env.hpp"
#include "edgesched/nn.hpp"
#include "edgesched/topology.hpp"
#include "edgesched/train.hpp"
#include "edgesched/workload.hpp"

namespace edgesched {

// Seed streams; every stochastic component draws from its own stream.
inline constexpr std::uint64_t kTopologyStream = 1;
inline constexpr std::uint64_t kTrainTraceStream = 2;
inline constexpr std::uint64_t kEvalTraceStream = 3;
inline constexpr std::uint64_t kRandomPolicyStream = 4;
inline constexpr std::uint64_t kAgentStream = 5;

/// Every accepted configuration key with its default value.
inline Config::Schema default_schema() {
  return {
      {"topology.nodes_file", ""},
      {"topology.edges_file", ""},
      {"topology.radius_m", ""},
      {"topology.n_nodes", "5"},
      {"topology.area_m", "1000"},
      {"topology.gen_radius_m", "600"},
      {"topology.node_classes", "2.4:16384,2.7:18432,3.0:20480,3.3:22528,3.6:24576"},
      {"catalog.file", ""},
      {"catalog.mem_mb", "20,100,180,250"},
      {"catalog.duration_slots", "1"},
      {"catalog.budget_factor", "3.0"},
      {"catalog.budget", ""},
      {"trace.file", ""},
      {"trace.horizon", "20"},
      {"trace.arrival_rate", "1.0"},
      {"trace.mix", ""},
      {"trace.max_requests", "0"},
      {"costs.alpha_switch", "0.01"},
      {"costs.beta_run", "0.002"},
      {"costs.delta_route", "0.003"},
      {"costs.reject_penalty", "5.0"},
      {"env.keepalive_slots", "10"},
      {"env.f_cap", "8"},
      {"dqn.episodes", "200"},
      {"dqn.gamma", "0.99"},
      {"dqn.learning_rate", "0.001"},
      {"dqn.epsilon_start", "1.0"},
      {"dqn.epsilon_end", "0.05"},
      {"dqn.epsilon_decay_steps", "20000"},
      {"dqn.batch_size", "64"},
      {"dqn.target_sync", "500"},
      {"dqn.buffer_capacity", "50000"},
      {"dqn.train_start", "0"},
      {"dqn.hidden", "128,128"},
      {"ppo.episodes", "200"},
      {"ppo.gamma", "0.99"},
      {"ppo.lambda", "0.95"},
      {"ppo.clip", "0.2"},
      {"ppo.learning_rate", "0.0003"},
      {"ppo.rollout", "2048"},
      {"ppo.epochs", "4"},
      {"ppo.minibatch", "256"},
      {"ppo.value_coef", "0.5"},
      {"ppo.entropy_coef", "0.01"},
      {"ppo.max_grad_norm", "0.5"},
      {"ppo.hidden", "128,128"},
      {"compare.schedulers", "greedy,random"},
      {"compare.eval_episodes", "10"},
      {"compare.oracle_max_states", "50000000"},
      {"compare.timing", "true"},
  };
}

inline Config default_config() { return Config(default_schema()); }

struct TraceParams {
  Slot horizon = 20;
  double arrival_rate = 1.0;
  std::vector<double> mix;
  std::size_t max_requests = 0;  // 0 = no truncation
};

/// Everything needed to instantiate environments and draw traces.
struct Scenario {
  std::shared_ptr<const Topology> topology;
  Catalog catalog;
  CostParams costs;
  EnvParams env_params;
  TraceParams trace_params;
  std::optional<Trace> fixed_trace;

  Environment make_env() const { return Environment(topology, catalog, costs, env_params); }

  /// Deterministic per (seed, stream, episode). Empty draws are redrawn.
  Trace trace_for(std::uint64_t seed, std::uint64_t stream, int episode) const {
    if (fixed_trace) return *fixed_trace;
    if (!(trace_params.arrival_rate > 0.0)) throw ConfigError("trace.arrival_rate must be > 0 to run episodes");
    for (std::uint64_t attempt = 0;; ++attempt) {
      auto trace = generate_trace(*topology, catalog, trace_params.horizon, trace_params.arrival_rate,
                                  trace_params.mix,
                                  derive_seed(seed, stream, static_cast<std::uint64_t>(episode) * 1024 + attempt));
      if (trace_params.max_requests > 0 && trace.size() > trace_params.max_requests) {
        trace.resize(trace_params.max_requests);
      }
      if (!trace.empty()) return trace;
      if (attempt > 1000) throw ConfigError("trace generator keeps producing empty traces");
    }
  }

  TraceSource source(std::uint64_t seed, std::uint64_t stream) const {
    return [this, seed, stream](int episode) { return trace_for(seed, stream, episode); };
  }
};

inline std::vector<NodeClass> parse_node_classes(const Config& cfg) {
  std::vector<NodeClass> out;
  for (const auto& item : cfg.list("topology.node_classes")) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("topology.node_classes entries must be cpu_ghz:mem_mb");
    try {
      out.push_back(NodeClass{std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw ConfigError("topology.node_classes: bad entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("topology.node_classes is empty");
  return out;
}

inline Topology topology_from_config(const Config& cfg, std::uint64_t seed) {
  if (cfg.has("topology.nodes_file")) {
    std::optional<std::filesystem::path> edges;
    std::optional<double> radius;
    if (cfg.has("topology.edges_file")) edges = cfg.str("topology.edges_file");
    if (cfg.has("topology.radius_m")) radius = cfg.real("topology.radius_m");
    if (edges.has_value() == radius.has_value()) {
      throw ConfigError("with topology.nodes_file set exactly one of topology.edges_file / topology.radius_m is required");
    }
    return load_topology(cfg.str("topology.nodes_file"), edges, radius);
  }
  const auto n = cfg.integer("topology.n_nodes");
  if (n < 1) throw ConfigError("topology.n_nodes must be >= 1");
  return generate_topology(static_cast<std::size_t>(n), parse_node_classes(cfg), cfg.real("topology.area_m"),
                           cfg.real("topology.gen_radius_m"), derive_seed(seed, kTopologyStream));
}

inline CostParams costs_from_config(const Config& cfg) {
  CostParams p;
  p.alpha_switch = cfg.real("costs.alpha_switch");
  p.beta_run = cfg.real("costs.beta_run");
  p.delta_route = cfg.real("costs.delta_route");
  try {
    p.reject_penalty = Money::parse(cfg.str("costs.reject_penalty"));
    p.validate();
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("costs: ") + e.what());
  }
  return p;
}

inline Catalog catalog_from_config(const Config& cfg, const Topology& topo, const CostParams& costs) {
  Catalog catalog;
  if (cfg.has("catalog.file")) {
    catalog = load_catalog(cfg.str("catalog.file"));
  } else {
    const auto sizes = cfg.real_list("catalog.mem_mb");
    const auto dur = cfg.integer("catalog.duration_slots");
    const double factor = cfg.real("catalog.budget_factor");
    if (sizes.empty()) throw ConfigError("catalog.mem_mb is empty");
    if (dur < 1) throw ConfigError("catalog.duration_slots must be >= 1");
    if (!(factor > 0.0)) throw ConfigError("catalog.budget_factor must be > 0");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (!(sizes[i] > 0.0)) throw ConfigError("catalog.mem_mb entries must be > 0");
      FunctionType fn{static_cast<FunctionId>(i), sizes[i], static_cast<int>(dur), Money::zero()};
      fn.budget = default_budget(fn, topo.nodes(), costs, factor);
      catalog.push_back(fn);
    }
  }
  if (cfg.has("catalog.budget")) {
    Money b;
    try {
      b = Money::parse(cfg.str("catalog.budget"));
    } catch (const ParseError& e) {
      throw ConfigError(std::string("catalog.budget: ") + e.what());
    }
    for (auto& f : catalog) f.budget = b;
  }
  try {
    validate_catalog(catalog);
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("catalog: ") + e.what());
  }
  return catalog;
}

inline std::vector<int> hidden_from_config(const Config& cfg, const std::string& key) {
  std::vector<int> out;
  for (double d : cfg.real_list(key)) out.push_back(static_cast<int>(d));
  if (out.empty()) throw ConfigError(key + " must list at least one layer size");
  return out;
}

inline TrainHyper hyper_from_config(const Config& cfg) {
  TrainHyper h;
  auto& d = h.dqn;
  d.gamma = cfg.real("dqn.gamma");
  d.learning_rate = cfg.real("dqn.learning_rate");
  d.epsilon_start = cfg.real("dqn.epsilon_start");
  d.epsilon_end = cfg.real("dqn.epsilon_end");
  d.epsilon_decay_steps = static_cast<int>(cfg.integer("dqn.epsilon_decay_steps"));
  d.batch_size = static_cast<int>(cfg.integer("dqn.batch_size"));
  d.target_sync = static_cast<int>(cfg.integer("dqn.target_sync"));
  d.buffer_capacity = static_cast<int>(cfg.integer("dqn.buffer_capacity"));
  d.train_start = static_cast<int>(cfg.integer("dqn.train_start"));
  d.hidden = hidden_from_config(cfg, "dqn.hidden");
  d.validate();
  auto& p = h.ppo;
  p.gamma = cfg.real("ppo.gamma");
  p.lambda = cfg.real("ppo.lambda");
  p.clip = cfg.real("ppo.clip");
  p.learning_rate = cfg.real("ppo.learning_rate");
  p.rollout = static_cast<int>(cfg.integer("ppo.rollout"));
  p.epochs = static_cast<int>(cfg.integer("ppo.epochs"));
  p.minibatch = static_cast<int>(cfg.integer("ppo.minibatch"));
  p.value_coef = cfg.real("ppo.value_coef");
  p.entropy_coef = cfg.real("ppo.entropy_coef");
  p.max_grad_norm = cfg.real("ppo.max_grad_norm");
  p.hidden = hidden_from_config(cfg, "ppo.hidden");
  p.validate();
  return h;
}

inline int episodes_from_config(const Config& cfg, Algo algo) {
  const auto n = cfg.integer(algo == Algo::kDqn ? "dqn.episodes" : "ppo.episodes");
  if (n < 0) throw ConfigError(algo_name(algo) + ".episodes must be >= 0");
  return static_cast<int>(n);
}

/// Builds the scenario; `seed` only matters for generated topologies.
inline Scenario scenario_from_config(const Config& cfg, std::uint64_t seed) {
  Scenario s;
  s.topology = std::make_shared<const Topology>(topology_from_config(cfg, seed));
  s.costs = costs_from_config(cfg);
  s.catalog = catalog_from_config(cfg, *s.topology, s.costs);
  s.env_params.keepalive_slots = static_cast<int>(cfg.integer("env.keepalive_slots"));
  s.env_params.f_cap = static_cast<int>(cfg.integer("env.f_cap"));
  try {
    s.env_params.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  s.trace_params.horizon = cfg.integer("trace.horizon");
  s.trace_params.arrival_rate = cfg.real("trace.arrival_rate");
  s.trace_params.mix = cfg.real_list("trace.mix");
  if (s.trace_params.mix.empty()) s.trace_params.mix.assign(s.catalog.size(), 1.0 / static_cast<double>(s.catalog.size()));
  if (s.trace_params.mix.size() != s.catalog.size()) throw ConfigError("trace.mix needs one weight per function type");
  const auto max_req = cfg.integer("trace.max_requests");
  if (max_req < 0) throw ConfigError("trace.max_requests must be >= 0");
  s.trace_params.max_requests = static_cast<std::size_t>(max_req);
  if (cfg.has("trace.file")) {
    auto trace = load_trace(cfg.str("trace.file"), s.catalog);
    if (s.trace_params.max_requests > 0 && trace.size() > s.trace_params.max_requests) {
      trace.resize(s.trace_params.max_requests);
    }
    if (trace.empty()) throw ConfigError("trace.file contains no requests");
    s.fixed_trace = std::move(trace);
  }
  return s;
}

/// Summary statistics over one or more episode logs.
struct SummaryStats {
  std::size_t episodes = 0;
  std::size_t requests = 0;
  std::size_t accepted = 0;
  double mean = 0.0;  // mean total over accepted requests
  Money p5, p25, p50, p75, p95;
  double acceptance_rate = 0.0;
  double mean_episode_cost = 0.0;  // accepted totals plus penalties, per episode
  double total_decision_time = 0.0;  // seconds
  double per_decision_time = 0.0;    // microseconds
};

/// Nearest-rank percentile of an ascending sequence: element ceil(pct/100 * N).
inline Money nearest_rank(const std::vector<Money>& sorted, int pct) {
  if (sorted.empty()) return Money::zero();
  const std::size_t n = sorted.size();
  std::size_t rank = (static_cast<std::size_t>(pct) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

inline SummaryStats summarize(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw ValidationError("cannot summarize an empty set of episode records");
  SummaryStats s;
  std::vector<Money> totals;
  std::set<int> episodes;
  Money objective = Money::zero();
  double decision_us = 0.0;
  for (const auto& r : records) {
    episodes.insert(r.episode);
    ++s.requests;
    objective += -r.reward;
    decision_us += r.decision_us;
    if (r.accepted) {
      ++s.accepted;
      totals.push_back(r.breakdown.total);
    }
  }
  std::sort(totals.begin(), totals.end());
  Money sum = Money::zero();
  for (auto t : totals) sum += t;
  s.episodes = episodes.size();
  s.mean = totals.empty() ? 0.0 : sum.to_double() / static_cast<double>(totals.size());
  s.p5 = nearest_rank(totals, 5);
  s.p25 = nearest_rank(totals, 25);
  s.p50 = nearest_rank(totals, 50);
  s.p75 = nearest_rank(totals, 75);
  s.p95 = nearest_rank(totals, 95);
  s.acceptance_rate = static_cast<double>(s.accepted) / static_cast<double>(s.requests);
  s.mean_episode_cost = objective.to_double() / static_cast<double>(s.episodes);
  s.total_decision_time = decision_us * 1e-6;
  s.per_decision_time = decision_us / static_cast<double>(s.requests);
  return s;
}

inline const std::vector<std::string>& known_schedulers() {
  static const std::vector<std::string> names{"dqn", "ppo", "greedy", "random", "oracle"};
  return names;
}

struct CompareRow {
  std::string scheduler;
  SummaryStats stats;
  double factor_vs_best = 1.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::map<std::string, std::vector<EpisodeRecord>> logs;
  std::map<std::string, TrainedModel> models;
};

inline void write_summary(const std::vector<CompareRow>& rows, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("scheduler", "episodes", "requests", "accepted", "acceptance_rate", "mean", "p5", "p25", "p50", "p75", "p95",
        "mean_episode_cost", "factor_vs_best");
  for (const auto& r : rows) {
    const auto& s = r.stats;
    w.row(r.scheduler, s.episodes, s.requests, s.accepted, csv::format_double(s.acceptance_rate),
          csv::format_double(s.mean), s.p5.str(), s.p25.str(), s.p50.str(), s.p75.str(), s.p95.str(),
          csv::format_double(s.mean_episode_cost), csv::format_double(r.factor_vs_best));
  }
}

/// Wall-clock columns live apart from summary.csv so that file stays
/// reproducible across runs.
inline void write_timing(const std::vector<CompareRow>& rows, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("scheduler", "total_decision_s", "per_decision_us");
  for (const auto& r : rows) {
    w.row(r.scheduler, csv::format_double(r.stats.total_decision_time), csv::format_double(r.stats.per_decision_time));
  }
}

inline void save_trained(const TrainedModel& m, const std::filesystem::path& models_dir) {
  std::filesystem::create_directories(models_dir);
  if (m.algo == Algo::kDqn) {
    nn::save_model(m.network, models_dir / "dqn_q.model");
  } else {
    nn::save_model(m.network, models_dir / "ppo_policy.model");
    if (m.value) nn::save_model(*m.value, models_dir / "ppo_value.model");
  }
}

/// Episodes of one scheduler over the shared evaluation traces.
inline std::vector<EpisodeRecord> evaluate_scheduler(const std::string& name, const Scenario& scenario,
                                                     const Policy* agent_policy, std::uint64_t seed, int episodes,
                                                     std::uint64_t oracle_max_states, bool timing) {
  std::vector<EpisodeRecord> all;
  Environment env = scenario.make_env();
  for (int e = 0; e < episodes; ++e) {
    Trace trace = scenario.trace_for(seed, kEvalTraceStream, e);
    std::vector<EpisodeRecord> log;
    if (name == "greedy") {
      log = greedy_episode(env, trace, e, timing);
    } else if (name == "random") {
      log = random_episode(env, trace, derive_seed(seed, kRandomPolicyStream, static_cast<std::uint64_t>(e)), e, timing);
    } else if (name == "oracle") {
      OracleResult res;
      try {
        res = oracle_optimal(env, trace, OracleOptions{oracle_max_states, true});
      } catch (const OracleLimitExceeded& ex) {
        throw OracleLimitExceeded("scheduler oracle, evaluation episode " + std::to_string(e) + " (" +
                                  std::to_string(trace.size()) + " requests, " + std::to_string(env.n_nodes()) +
                                  " nodes): " + ex.what());
      }
      log = replay_actions(env, trace, res.actions, e);
      if (timing) {
        for (auto& r : log) r.decision_us = res.seconds * 1e6 / static_cast<double>(log.size());
      }
    } else {
      log = run_episode(env, trace, *agent_policy, e, timing);
    }
    all.insert(all.end(), log.begin(), log.end());
  }
  return all;
}

/// Trains any requested agents, then evaluates every scheduler on the same
/// seeded traces. Writes outputs under `out_dir` when given.
inline CompareResult run_compare(const Config& cfg, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  const auto schedulers = cfg.list("compare.schedulers");
  if (schedulers.empty()) throw ConfigError("compare.schedulers is empty");
  for (const auto& s : schedulers) {
    if (std::find(known_schedulers().begin(), known_schedulers().end(), s) == known_schedulers().end()) {
      throw ConfigError("compare.schedulers: unknown scheduler '" + s + "'");
    }
  }
  const auto eval_episodes = cfg.integer("compare.eval_episodes");
  if (eval_episodes < 1) throw ConfigError("compare.eval_episodes must be >= 1");
  const auto max_states = cfg.integer("compare.oracle_max_states");
  if (max_states < 1) throw ConfigError("compare.oracle_max_states must be >= 1");
  const bool timing = cfg.boolean("compare.timing");
  const Scenario scenario = scenario_from_config(cfg, seed);
  const TrainHyper hyper = hyper_from_config(cfg);

  CompareResult result;
  for (const auto& name : schedulers) {
    std::optional<Policy> policy;
    if (name == "dqn" || name == "ppo") {
      const Algo algo = parse_algo(name);
      auto model = train(algo, scenario.make_env(), scenario.source(seed, kTrainTraceStream), hyper,
                         episodes_from_config(cfg, algo), derive_seed(seed, kAgentStream, static_cast<std::uint64_t>(algo)));
      auto [it, _] = result.models.insert_or_assign(name, std::move(model));
      policy = it->second.policy();
    }
    auto log = evaluate_scheduler(name, scenario, policy ? &*policy : nullptr, seed, static_cast<int>(eval_episodes),
                                  static_cast<std::uint64_t>(max_states), timing);
    result.rows.push_back(CompareRow{name, summarize(log), 1.0});
    result.logs.insert_or_assign(name, std::move(log));
  }
  double best = result.rows.front().stats.mean_episode_cost;
  for (const auto& r : result.rows) best = std::min(best, r.stats.mean_episode_cost);
  for (auto& r : result.rows) {
    r.factor_vs_best = r.stats.mean_episode_cost == best ? 1.0
                       : best > 0.0                     ? r.stats.mean_episode_cost / best
                                                        : std::numeric_limits<double>::infinity();
  }

  if (out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(*out_dir / "episodes");
    write_summary(result.rows, *out_dir / "summary.csv");
    write_timing(result.rows, *out_dir / "timing.csv");
    for (const auto& [name, log] : result.logs) write_episode_log(log, *out_dir / "episodes" / (name + ".csv"));
    for (const auto& [name, model] : result.models) {
      fs::create_directories(*out_dir / "curves");
      write_curve(model.curve, *out_dir / "curves" / (name + ".csv"));
      save_trained(model, *out_dir / "models");
    }
  }
  return result;
}

}  // namespace edgesched
