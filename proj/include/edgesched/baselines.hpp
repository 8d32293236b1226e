#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "edgesched/env.hpp"
#include "edgesched/policy.hpp"
#include "edgesched/rng.hpp"

namespace edgesched {

/// Cheapest feasible placement for the current request (ties: lowest index);
/// rejects only when nothing is feasible.
inline int greedy_action(const Environment& env) {
  const auto& space = env.action_space();
  int best = space.reject_index();
  Money best_cost = Money::unbounded();
  for (NodeId v = 0; v < static_cast<NodeId>(env.n_nodes()); ++v) {
    for (bool g : {false, true}) {
      const Action a{v, g};
      const auto cost = env.quote(a);
      if (cost && cost->total < best_cost) {
        best_cost = cost->total;
        best = space.index(a);
      }
    }
  }
  return best;
}

inline Policy greedy_policy() { return [](const Environment& env) { return greedy_action(env); }; }

/// Uniform over the feasible set, reject included.
inline Policy random_policy(std::uint64_t seed) {
  return [rng = Rng(seed)](const Environment& env) mutable {
    const auto feasible = feasible_indices(env.action_mask());
    return feasible[uniform_index(rng, feasible.size())];
  };
}

inline std::vector<EpisodeRecord> greedy_episode(Environment& env, Trace trace, int episode = 0,
                                                 bool record_timing = true) {
  return run_episode(env, std::move(trace), greedy_policy(), episode, record_timing);
}

inline std::vector<EpisodeRecord> random_episode(Environment& env, Trace trace, std::uint64_t seed, int episode = 0,
                                                 bool record_timing = true) {
  return run_episode(env, std::move(trace), random_policy(seed), episode, record_timing);
}

struct OracleResult {
  Money cost;               // sum of accepted totals plus rejection penalties
  std::vector<int> actions; // one flat action index per request
  std::uint64_t states = 0; // search nodes expanded
  double seconds = 0.0;
};

struct OracleOptions {
  std::uint64_t max_states = 50'000'000;
  bool prune = true;  // branch and bound; false = plain enumeration
};

namespace detail {

class OracleSearch {
 public:
  OracleSearch(const OracleOptions& opts, std::size_t depth) : opts_(opts), path_(depth) {}

  void run(const Environment& env) {
    best_.cost = Money::unbounded();
    expand(env, 0);
  }

  OracleResult take() { return std::move(best_); }
  std::uint64_t states() const { return states_; }

 private:
  void expand(const Environment& env, std::size_t depth) {
    if (++states_ > opts_.max_states) {
      throw OracleLimitExceeded("exhaustive oracle exceeded max_states=" + std::to_string(opts_.max_states) +
                                "; use fewer nodes or a shorter trace");
    }
    if (env.done()) {
      if (env.episode_cost() < best_.cost) {
        best_.cost = env.episode_cost();
        best_.actions.assign(path_.begin(), path_.begin() + static_cast<std::ptrdiff_t>(depth));
      }
      return;
    }
    // Children ordered by immediate cost so a good incumbent appears early.
    struct Child {
      Money cost;
      int index;
    };
    std::vector<Child> children;
    const auto& space = env.action_space();
    for (NodeId v = 0; v < static_cast<NodeId>(env.n_nodes()); ++v) {
      for (bool g : {false, true}) {
        if (auto q = env.quote(Action{v, g})) children.push_back({q->total, space.index(Action{v, g})});
      }
    }
    children.push_back({env.costs().reject_penalty, space.reject_index()});
    std::stable_sort(children.begin(), children.end(), [](const Child& a, const Child& b) { return a.cost < b.cost; });

    for (const auto& c : children) {
      // Remaining cost is bounded below by zero.
      if (opts_.prune && env.episode_cost() + c.cost >= best_.cost) continue;
      Environment next = env;
      next.step(c.index);
      path_[depth] = c.index;
      expand(next, depth + 1);
    }
  }

  OracleOptions opts_;
  std::vector<int> path_;
  OracleResult best_;
  std::uint64_t states_ = 0;
};

}  // namespace detail

/// Exact minimum of the episode cost over every action sequence (rejects
/// included) by depth-first search.
inline OracleResult oracle_optimal(const Environment& prototype, const Trace& trace, OracleOptions opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  Environment env = prototype;
  env.set_logging(false);
  env.reset(trace);
  detail::OracleSearch search(opts, trace.size());
  search.run(env);
  auto result = search.take();
  result.states = search.states();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline OracleResult oracle_optimal(std::shared_ptr<const Topology> topology, const Catalog& catalog,
                                   const CostParams& costs, const Trace& trace, const EnvParams& env_params = {},
                                   OracleOptions opts = {}) {
  return oracle_optimal(Environment(std::move(topology), catalog, costs, env_params), trace, opts);
}

/// Replays a fixed action sequence and returns the episode log.
inline std::vector<EpisodeRecord> replay_actions(Environment& env, Trace trace, const std::vector<int>& actions,
                                                 int episode = 0) {
  std::size_t k = 0;
  return run_episode(
      env, std::move(trace),
      [&](const Environment&) {
        if (k >= actions.size()) throw ValidationError("action sequence shorter than the trace");
        return actions[k++];
      },
      episode, false);
}

}  // namespace edgesched
