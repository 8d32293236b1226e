#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <vector>

#include "edgesched/env.hpp"
#include "edgesched/nn.hpp"
#include "edgesched/workload.hpp"

namespace edgesched {

/// Maps the environment's current decision point to a flat action index.
using Policy = std::function<int(const Environment&)>;

inline std::vector<int> feasible_indices(const ActionMask& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Highest-scoring feasible index; ties go to the lowest index.
inline int masked_argmax(const nn::Vector& scores, const ActionMask& mask) {
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double s = scores(static_cast<Eigen::Index>(i));
    if (best < 0 || s > best_score) {
      best = static_cast<int>(i);
      best_score = s;
    }
  }
  if (best < 0) throw ValidationError("action mask has no feasible entry");
  return best;
}

/// Deterministic policy: masked argmax of a network's outputs (Q-values or
/// policy logits).
inline Policy network_argmax_policy(const nn::Mlp& net) {
  return [&net](const Environment& env) {
    return masked_argmax(net.forward(env.encode_observation()), env.action_mask());
  };
}

/// Runs `policy` over one episode of `trace`. Only the policy call is timed.
inline std::vector<EpisodeRecord> run_episode(Environment& env, Trace trace, const Policy& policy, int episode,
                                              bool record_timing = true) {
  env.set_episode(episode);
  env.set_logging(true);
  env.reset(std::move(trace));
  while (!env.done()) {
    const auto start = std::chrono::steady_clock::now();
    const int action = policy(env);
    const auto stop = std::chrono::steady_clock::now();
    const double us = record_timing ? std::chrono::duration<double, std::micro>(stop - start).count() : 0.0;
    env.step(action, us);
  }
  return env.episode_log();
}

}  // namespace edgesched
