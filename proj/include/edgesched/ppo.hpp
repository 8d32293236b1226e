#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "edgesched/env.hpp"
#include "edgesched/nn.hpp"
#include "edgesched/policy.hpp"
#include "edgesched/rng.hpp"

namespace edgesched {

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;  // GAE
  double clip = 0.2;
  double learning_rate = 3e-4;
  int rollout = 2048;
  int epochs = 4;
  int minibatch = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;  // global-norm clipping per network; 0 disables
  std::vector<int> hidden{128, 128};

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("ppo.lambda must be in [0, 1]");
    if (!(clip > 0.0)) throw ConfigError("ppo.clip must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
    if (rollout < 1 || epochs < 1 || minibatch < 1) throw ConfigError("ppo rollout/epochs/minibatch must be >= 1");
    if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0) {
      throw ConfigError("ppo coefficients must be >= 0");
    }
    for (int h : hidden) {
      if (h < 1) throw ConfigError("ppo.hidden sizes must be >= 1");
    }
  }
};

/// Log-probabilities of a softmax restricted to feasible entries; masked
/// entries get -inf.
inline nn::Vector masked_log_softmax(const nn::Vector& logits, const ActionMask& mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits(static_cast<Eigen::Index>(i)));
  }
  if (!std::isfinite(mx)) throw ValidationError("action mask has no feasible entry");
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) sum += std::exp(logits(static_cast<Eigen::Index>(i)) - mx);
  }
  const double log_z = mx + std::log(sum);
  nn::Vector out(logits.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out(k) = mask[i] ? logits(k) - log_z : -std::numeric_limits<double>::infinity();
  }
  return out;
}

/// Draws an index from exp(logp) by inverse CDF.
inline int sample_categorical(const nn::Vector& logp, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index i = 0; i < logp.size(); ++i) {
    if (!std::isfinite(logp(i))) continue;
    acc += std::exp(logp(i));
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
inline double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

struct Trajectory {
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<double> logprobs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<ActionMask> masks;
  double last_value = 0.0;  // V of the state after the final step (ignored if it was terminal)

  std::size_t size() const { return actions.size(); }
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation, backwards over the trajectory:
///   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
///   R_t     = A_t + V_t
inline Advantages compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                     const std::vector<std::uint8_t>& dones, double last_value, double gamma,
                                     double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ValidationError("trajectory fields have inconsistent lengths");
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double not_done = dones[k] ? 0.0 : 1.0;
    const double next_value = (k + 1 < n) ? values[k + 1] : last_value;
    const double delta = rewards[k] + gamma * next_value * not_done - values[k];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
  }
  return out;
}

inline Advantages compute_advantages(const Trajectory& traj, double gamma, double lambda) {
  return compute_advantages(traj.rewards, traj.values, traj.dones, traj.last_value, gamma, lambda);
}

/// Inputs to one PPO update, flattened from a trajectory.
struct PpoBatch {
  nn::Matrix observations;  // one column per sample
  std::vector<int> actions;
  std::vector<double> logprobs_old;
  std::vector<ActionMask> masks;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

inline nn::Matrix stack_columns(const std::vector<Observation>& obs) {
  if (obs.empty()) return {};
  nn::Matrix m(static_cast<Eigen::Index>(obs.front().size()), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const nn::Vector>(obs[i].data(), static_cast<Eigen::Index>(obs[i].size()));
  }
  return m;
}

inline PpoBatch make_ppo_batch(const Trajectory& traj, const Advantages& adv) {
  PpoBatch b;
  b.observations = stack_columns(traj.observations);
  b.actions = traj.actions;
  b.logprobs_old = traj.logprobs;
  b.masks = traj.masks;
  b.advantages = adv.advantages;
  b.returns = adv.returns;
  return b;
}

/// Zero mean, unit standard deviation (population). Constant input maps to 0.
inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

struct PolicyStep {
  nn::Gradients grads;
  double policy_loss = 0.0;  // -mean clipped surrogate
  double entropy = 0.0;      // mean over samples
  double clip_fraction = 0.0;
};

/// Gradient of  -mean(clipped surrogate) - entropy_coef * mean(entropy)
/// with respect to the policy parameters, over the samples in `idx`.
inline PolicyStep ppo_policy_gradients(const nn::Mlp& policy, const PpoBatch& batch, const std::vector<std::size_t>& idx,
                                       double clip, double entropy_coef) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  nn::Matrix x(batch.observations.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = batch.observations.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
  nn::Cache cache;
  const nn::Matrix logits = policy.forward(x, &cache);
  nn::Matrix grad = nn::Matrix::Zero(logits.rows(), logits.cols());
  PolicyStep out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t k = idx[static_cast<std::size_t>(i)];
    const auto& mask = batch.masks[k];
    const nn::Vector logp = masked_log_softmax(logits.col(i), mask);
    const auto a = static_cast<Eigen::Index>(batch.actions[k]);
    const double adv = batch.advantages[k];
    const double ratio = std::exp(logp(a) - batch.logprobs_old[k]);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    out.policy_loss -= std::min(unclipped, clipped) * inv_n;
    if (std::abs(ratio - 1.0) > clip) out.clip_fraction += inv_n;

    // d(-surrogate)/d(logp_a) is -ratio*A on the unclipped branch, else 0.
    const double g_logp = (unclipped <= clipped) ? -unclipped : 0.0;
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < logp.size(); ++j) {
      if (mask[static_cast<std::size_t>(j)]) entropy -= std::exp(logp(j)) * logp(j);
    }
    out.entropy += entropy * inv_n;
    for (Eigen::Index j = 0; j < logp.size(); ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      const double p = std::exp(logp(j));
      double g = g_logp * ((j == a ? 1.0 : 0.0) - p);
      // dH/dz_j = -p_j (log p_j + H)
      g -= entropy_coef * (-p * (logp(j) + entropy));
      grad(j, i) = g * inv_n;
    }
  }
  out.grads = policy.backward(cache, grad);
  return out;
}

struct ValueStep {
  nn::Gradients grads;
  double value_loss = 0.0;  // mean squared error to returns (unscaled)
};

inline ValueStep ppo_value_gradients(const nn::Mlp& value, const PpoBatch& batch, const std::vector<std::size_t>& idx,
                                     double value_coef) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  nn::Matrix x(batch.observations.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = batch.observations.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
  nn::Cache cache;
  const nn::Matrix v = value.forward(x, &cache);
  nn::Matrix grad(1, n);
  ValueStep out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double err = v(0, i) - batch.returns[idx[static_cast<std::size_t>(i)]];
    out.value_loss += err * err / static_cast<double>(n);
    grad(0, i) = value_coef * 2.0 * err / static_cast<double>(n);
  }
  out.grads = value.backward(cache, grad);
  return out;
}

inline void clip_grad_norm(nn::Gradients& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& w : g.weight) sq += w.squaredNorm();
  for (const auto& b : g.bias) sq += b.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) g.scale(max_norm / norm);
}

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// `epochs` passes over shuffled minibatches; advantages are normalized once
/// per call. Returns the means over all minibatches.
inline PpoStats ppo_update(nn::Mlp& policy, nn::Mlp& value, nn::Optimizer& policy_opt, nn::Optimizer& value_opt,
                           PpoBatch batch, const PpoHyper& hyper, Rng& rng) {
  PpoStats stats;
  if (batch.size() == 0) return stats;
  normalize_advantages(batch.advantages);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(hyper.minibatch);
  int updates = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + mb)));
      auto ps = ppo_policy_gradients(policy, batch, idx, hyper.clip, hyper.entropy_coef);
      auto vs = ppo_value_gradients(value, batch, idx, hyper.value_coef);
      clip_grad_norm(ps.grads, hyper.max_grad_norm);
      clip_grad_norm(vs.grads, hyper.max_grad_norm);
      policy_opt.step(policy, ps.grads);
      value_opt.step(value, vs.grads);
      stats.policy_loss += ps.policy_loss;
      stats.value_loss += vs.value_loss;
      stats.entropy += ps.entropy;
      stats.clip_fraction += ps.clip_fraction;
      ++updates;
    }
  }
  const double k = 1.0 / static_cast<double>(updates);
  stats.policy_loss *= k;
  stats.value_loss *= k;
  stats.entropy *= k;
  stats.clip_fraction *= k;
  return stats;
}

/// Supplies the trace for a given training episode index.
using TraceSource = std::function<Trace(int episode)>;

/// Environment plus the episode bookkeeping a rollout needs to span
/// episode boundaries.
struct RolloutState {
  Environment env;
  TraceSource traces;
  int next_episode = 0;
  int max_episodes = std::numeric_limits<int>::max();
  Observation obs;
  std::function<void(const Environment&)> on_episode_end;

  bool exhausted() const { return next_episode >= max_episodes && env.done(); }

  void ensure_started() {
    if (env.started() && !env.done()) return;
    env.set_episode(next_episode);
    env.set_logging(false);
    obs = env.reset(traces(next_episode));
    ++next_episode;
  }
};

/// Samples up to `steps` actions from the masked softmax policy, resetting
/// into the next episode on done. Stops early once `max_episodes` episodes
/// have finished.
inline Trajectory ppo_rollout(RolloutState& st, const nn::Mlp& policy, const nn::Mlp& value, int steps, Rng& rng) {
  Trajectory traj;
  for (int k = 0; k < steps; ++k) {
    if (st.env.done() && st.next_episode >= st.max_episodes) break;
    st.ensure_started();
    const ActionMask mask = st.env.action_mask();
    const nn::Vector logp = masked_log_softmax(policy.forward(st.obs), mask);
    const int a = sample_categorical(logp, rng);
    const double v = value.forward(st.obs)(0);
    const auto out = st.env.step(a);
    traj.observations.push_back(st.obs);
    traj.actions.push_back(a);
    traj.logprobs.push_back(logp(a));
    traj.rewards.push_back(out.reward.to_double());
    traj.values.push_back(v);
    traj.dones.push_back(out.done ? 1 : 0);
    traj.masks.push_back(mask);
    st.obs = out.observation;
    if (out.done && st.on_episode_end) st.on_episode_end(st.env);
  }
  traj.last_value = (!st.env.done() && st.env.started()) ? value.forward(st.obs)(0) : 0.0;
  return traj;
}

}  // namespace edgesched
