#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgesched/csv.hpp"
#include "edgesched/dqn.hpp"
#include "edgesched/env.hpp"
#include "edgesched/ppo.hpp"

namespace edgesched {

enum class Algo { kDqn, kPpo };

inline std::string algo_name(Algo a) { return a == Algo::kDqn ? "dqn" : "ppo"; }

inline Algo parse_algo(const std::string& s) {
  if (s == "dqn") return Algo::kDqn;
  if (s == "ppo") return Algo::kPpo;
  throw ConfigError("unknown algorithm '" + s + "' (expected dqn or ppo)");
}

struct CurvePoint {
  int episode = 0;
  Money total_cost;  // accepted totals plus rejection penalties
  double acceptance_rate = 0.0;
  double mean_loss = 0.0;
  double epsilon_or_clipfrac = 0.0;
};

struct TrainedModel {
  Algo algo = Algo::kDqn;
  nn::Mlp network;              // Q-network (dqn) or policy (ppo)
  std::optional<nn::Mlp> value; // ppo only
  std::vector<CurvePoint> curve;

  /// Deterministic evaluation policy: masked argmax of Q-values or logits.
  Policy policy() const { return network_argmax_policy(network); }
};

inline void write_curve(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("episode", "total_cost", "acceptance_rate", "mean_loss", "epsilon_or_clipfrac");
  for (const auto& c : curve) {
    w.row(c.episode, c.total_cost.str(), csv::format_double(c.acceptance_rate), csv::format_double(c.mean_loss),
          csv::format_double(c.epsilon_or_clipfrac));
  }
}

namespace detail {
inline void check_finite(const nn::Mlp& net, const std::string& what, int episode) {
  if (!net.all_finite()) {
    throw TrainingDiverged(what + " has non-finite parameters after episode " + std::to_string(episode));
  }
}
}  // namespace detail

/// observe -> select (epsilon-greedy, masked) -> step -> replay update.
inline TrainedModel train_dqn(const Environment& prototype, const TraceSource& traces, const DqnHyper& hyper,
                              int episodes, std::uint64_t seed) {
  hyper.validate();
  Environment env = prototype;
  env.set_logging(false);
  DqnAgent agent(env.observation_size(), env.action_count(), hyper, seed);
  TrainedModel model;
  model.algo = Algo::kDqn;
  for (int ep = 0; ep < episodes; ++ep) {
    env.set_episode(ep);
    Observation obs = env.reset(traces(ep));
    double loss_sum = 0.0;
    int loss_n = 0;
    std::size_t steps = 0;
    while (!env.done()) {
      const ActionMask mask = env.action_mask();
      const int a = agent.act(obs, mask);
      auto out = env.step(a);
      ++steps;
      Transition t{std::move(obs), out.action_index, out.reward.to_double(), out.observation, out.done,
                   env.action_mask()};
      obs = std::move(out.observation);
      if (auto loss = agent.observe(std::move(t))) {
        loss_sum += *loss;
        ++loss_n;
      }
    }
    detail::check_finite(agent.qnet(), "dqn q-network", ep);
    model.curve.push_back(CurvePoint{ep, env.episode_cost(),
                                     static_cast<double>(env.accepted_count()) / static_cast<double>(steps),
                                     loss_n ? loss_sum / loss_n : 0.0, agent.epsilon()});
  }
  model.network = agent.qnet();
  return model;
}

/// Alternates rollouts of `hyper.rollout` steps with clipped-surrogate
/// updates until `episodes` episodes have completed.
inline TrainedModel train_ppo(const Environment& prototype, const TraceSource& traces, const PpoHyper& hyper,
                              int episodes, std::uint64_t seed) {
  hyper.validate();
  const auto obs_dim = prototype.observation_size();
  const auto n_actions = prototype.action_count();
  nn::Mlp policy(DqnAgent::layer_dims(obs_dim, n_actions, hyper.hidden), derive_seed(seed, 0x61));
  nn::Mlp value(DqnAgent::layer_dims(obs_dim, 1, hyper.hidden), derive_seed(seed, 0x62));
  // Small final policy layer so the initial policy is close to uniform.
  policy.mutable_layers().back().weight *= 0.01;
  nn::Optimizer policy_opt(policy, {nn::OptimizerConfig::Kind::kAdam, hyper.learning_rate});
  nn::Optimizer value_opt(value, {nn::OptimizerConfig::Kind::kAdam, hyper.learning_rate});
  Rng rng(derive_seed(seed, 0x63));

  TrainedModel model;
  model.algo = Algo::kPpo;
  PpoStats last;
  RolloutState st{prototype, traces, 0, episodes, {}, {}};
  st.on_episode_end = [&](const Environment& e) {
    model.curve.push_back(CurvePoint{e.episode(), e.episode_cost(),
                                     static_cast<double>(e.accepted_count()) / static_cast<double>(e.trace().size()),
                                     last.policy_loss, last.clip_fraction});
  };
  while (episodes > 0 && !st.exhausted()) {
    const auto traj = ppo_rollout(st, policy, value, hyper.rollout, rng);
    if (traj.size() == 0) break;
    const auto adv = compute_advantages(traj, hyper.gamma, hyper.lambda);
    last = ppo_update(policy, value, policy_opt, value_opt, make_ppo_batch(traj, adv), hyper, rng);
    detail::check_finite(policy, "ppo policy", st.next_episode - 1);
    detail::check_finite(value, "ppo value network", st.next_episode - 1);
  }
  model.network = std::move(policy);
  model.value = std::move(value);
  return model;
}

struct TrainHyper {
  DqnHyper dqn;
  PpoHyper ppo;
};

inline TrainedModel train(Algo algo, const Environment& prototype, const TraceSource& traces, const TrainHyper& hyper,
                          int episodes, std::uint64_t seed) {
  if (episodes < 0) throw ValidationError("episodes must be >= 0");
  if (algo == Algo::kDqn) return train_dqn(prototype, traces, hyper.dqn, episodes, seed);
  return train_ppo(prototype, traces, hyper.ppo, episodes, seed);
}

}  // namespace edgesched
