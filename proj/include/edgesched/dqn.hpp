#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "edgesched/env.hpp"
#include "edgesched/nn.hpp"
#include "edgesched/policy.hpp"
#include "edgesched/replay.hpp"
#include "edgesched/rng.hpp"

namespace edgesched {

struct Transition {
  Observation s;
  int a = 0;
  double r = 0.0;
  Observation s_next;
  bool done = false;
  ActionMask mask_next;
};

struct DqnHyper {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 20000;
  int batch_size = 64;
  int target_sync = 500;  // in training steps
  int buffer_capacity = 50000;
  int train_start = 0;  // minimum buffer size before updates; 0 means batch_size
  std::vector<int> hidden{128, 128};

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("dqn.gamma must be in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("dqn.learning_rate must be > 0");
    for (double e : {epsilon_start, epsilon_end}) {
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("dqn epsilon values must be in [0, 1]");
    }
    if (epsilon_decay_steps < 0) throw ConfigError("dqn.epsilon_decay_steps must be >= 0");
    if (batch_size < 1) throw ConfigError("dqn.batch_size must be >= 1");
    if (target_sync < 1) throw ConfigError("dqn.target_sync must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("dqn.buffer_capacity must be >= 1");
    if (train_start < 0) throw ConfigError("dqn.train_start must be >= 0");
    for (int h : hidden) {
      if (h < 1) throw ConfigError("dqn.hidden sizes must be >= 1");
    }
  }

  /// Linear decay from start to end over `epsilon_decay_steps` env steps.
  double epsilon_at(std::int64_t step) const {
    if (epsilon_decay_steps == 0 || step >= epsilon_decay_steps) return epsilon_end;
    const double frac = static_cast<double>(step) / static_cast<double>(epsilon_decay_steps);
    return epsilon_start + frac * (epsilon_end - epsilon_start);
  }
};

/// epsilon-greedy over the feasible entries of `mask`.
inline int dqn_select(const nn::Mlp& qnet, const Observation& obs, const ActionMask& mask, double epsilon, Rng& rng) {
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
    throw ValidationError("action mask has no feasible entry");
  }
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    const auto feasible = feasible_indices(mask);
    return feasible[uniform_index(rng, feasible.size())];
  }
  return masked_argmax(qnet.forward(obs), mask);
}

/// y = r for terminal transitions, else r + gamma * max over feasible a' of
/// next_q(a', i). `next_q` holds one column per transition.
inline std::vector<double> bellman_targets(const std::vector<double>& rewards, const std::vector<std::uint8_t>& dones,
                                           const nn::Matrix& next_q, const std::vector<const ActionMask*>& masks_next,
                                           double gamma) {
  std::vector<double> y(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (dones[i]) {
      y[i] = rewards[i];
      continue;
    }
    const auto& mask = *masks_next[i];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mask.size(); ++a) {
      if (mask[a]) best = std::max(best, next_q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)));
    }
    y[i] = rewards[i] + gamma * best;
  }
  return y;
}

/// One gradient step on mean squared TD error; only `qnet` changes.
inline double dqn_train_step(nn::Mlp& qnet, const nn::Mlp& target_net, nn::Optimizer& opt,
                             const std::vector<const Transition*>& batch, double gamma) {
  if (batch.empty()) throw ValidationError("empty DQN batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto obs_dim = static_cast<Eigen::Index>(batch.front()->s.size());
  nn::Matrix s(obs_dim, n);
  nn::Matrix s_next(obs_dim, n);
  std::vector<double> rewards(batch.size());
  std::vector<std::uint8_t> dones(batch.size());
  std::vector<const ActionMask*> masks(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    s.col(i) = Eigen::Map<const nn::Vector>(t.s.data(), obs_dim);
    s_next.col(i) = Eigen::Map<const nn::Vector>(t.s_next.data(), obs_dim);
    rewards[static_cast<std::size_t>(i)] = t.r;
    dones[static_cast<std::size_t>(i)] = t.done ? 1 : 0;
    masks[static_cast<std::size_t>(i)] = &t.mask_next;
  }
  const auto y = bellman_targets(rewards, dones, target_net.forward(s_next), masks, gamma);

  nn::Cache cache;
  const nn::Matrix q = qnet.forward(s, &cache);
  nn::Matrix grad = nn::Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->a);
    const double err = q(a, i) - y[static_cast<std::size_t>(i)];
    loss += err * err;
    grad(a, i) = 2.0 * err / static_cast<double>(n);
  }
  opt.step(qnet, qnet.backward(cache, grad));
  return loss / static_cast<double>(n);
}

inline void target_sync(const nn::Mlp& qnet, nn::Mlp& target_net) { target_net.copy_parameters_from(qnet); }

/// Q-network, target network, replay and exploration schedule.
class DqnAgent {
 public:
  DqnAgent(std::size_t obs_dim, std::size_t n_actions, DqnHyper hyper, std::uint64_t seed)
      : hyper_(std::move(hyper)),
        qnet_(layer_dims(obs_dim, n_actions, hyper_.hidden), derive_seed(seed, 0x51)),
        target_(qnet_),
        opt_(qnet_, nn::OptimizerConfig{nn::OptimizerConfig::Kind::kAdam, hyper_.learning_rate}),
        buffer_(static_cast<std::size_t>(hyper_.buffer_capacity)),
        rng_(derive_seed(seed, 0x52)) {
    hyper_.validate();
  }

  static std::vector<int> layer_dims(std::size_t in, std::size_t out, const std::vector<int>& hidden) {
    std::vector<int> dims{static_cast<int>(in)};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(static_cast<int>(out));
    return dims;
  }

  const DqnHyper& hyper() const { return hyper_; }
  const nn::Mlp& qnet() const { return qnet_; }
  const nn::Mlp& target() const { return target_; }
  const ReplayBuffer<Transition>& buffer() const { return buffer_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t train_steps() const { return train_steps_; }
  double epsilon() const { return hyper_.epsilon_at(env_steps_); }

  int act(const Observation& obs, const ActionMask& mask) { return dqn_select(qnet_, obs, mask, epsilon(), rng_); }

  /// Stores the transition and, once warm, takes one training step.
  /// Returns the loss when an update happened.
  std::optional<double> observe(Transition t) {
    buffer_.push(std::move(t));
    ++env_steps_;
    const auto start = static_cast<std::size_t>(hyper_.train_start > 0 ? hyper_.train_start : hyper_.batch_size);
    if (buffer_.size() < start) return std::nullopt;
    const auto batch = buffer_.sample(static_cast<std::size_t>(hyper_.batch_size), rng_);
    const double loss = dqn_train_step(qnet_, target_, opt_, batch, hyper_.gamma);
    ++train_steps_;
    if (train_steps_ % hyper_.target_sync == 0) target_sync(qnet_, target_);
    return loss;
  }

 private:
  DqnHyper hyper_;
  nn::Mlp qnet_;
  nn::Mlp target_;
  nn::Optimizer opt_;
  ReplayBuffer<Transition> buffer_;
  Rng rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t train_steps_ = 0;
};

}  // namespace edgesched
