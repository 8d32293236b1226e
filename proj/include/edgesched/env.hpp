#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgesched/costs.hpp"
#include "edgesched/csv.hpp"
#include "edgesched/error.hpp"
#include "edgesched/topology.hpp"
#include "edgesched/workload.hpp"

namespace edgesched {

struct EnvParams {
  int keepalive_slots = 10;
  int f_cap = 8;  // container counts saturate at this value in observations

  void validate() const {
    if (keepalive_slots < 0) throw ValidationError("keepalive_slots must be >= 0");
    if (f_cap < 1) throw ValidationError("f_cap must be >= 1");
  }
};

/// Place the current request on `target`, either on a fresh container
/// (`spawn_new`) or on an idle warm one.
struct Action {
  NodeId target = 0;
  bool spawn_new = false;

  bool operator==(const Action&) const = default;
};

/// Flat discrete action space: index 2*v + g for placements, 2*|V| for reject.
class ActionSpace {
 public:
  explicit ActionSpace(std::size_t n_nodes) : n_nodes_(n_nodes) {}

  std::size_t size() const { return 2 * n_nodes_ + 1; }
  int reject_index() const { return static_cast<int>(2 * n_nodes_); }

  int index(const Action& a) const {
    if (a.target < 0 || static_cast<std::size_t>(a.target) >= n_nodes_) {
      throw ValidationError("action target out of range: " + std::to_string(a.target));
    }
    return 2 * a.target + (a.spawn_new ? 1 : 0);
  }
  int index(const std::optional<Action>& a) const { return a ? index(*a) : reject_index(); }

  /// nullopt is the explicit reject.
  std::optional<Action> decode(int idx) const {
    if (idx < 0 || static_cast<std::size_t>(idx) >= size()) {
      throw ValidationError("action index out of range: " + std::to_string(idx));
    }
    if (idx == reject_index()) return std::nullopt;
    return Action{idx / 2, (idx % 2) == 1};
  }

 private:
  std::size_t n_nodes_;
};

struct Container {
  std::int64_t id = 0;
  NodeId node = 0;
  FunctionId fn_type = 0;
  Slot busy_until = 0;  // serving a request while clock < busy_until
  Slot warm_until = 0;  // evicted once clock > warm_until

  bool idle_at(Slot clock) const { return busy_until <= clock; }
  bool operator==(const Container&) const = default;
};

using Observation = std::vector<double>;
using ActionMask = std::vector<std::uint8_t>;

/// One row of the episode log.
struct EpisodeRecord {
  int episode = 0;
  Request request;
  NodeId target = -1;  // -1 when rejected
  bool spawned = false;
  bool accepted = false;
  CostBreakdown breakdown;  // zeros when rejected
  Money reward;
  double decision_us = 0.0;
  std::int64_t container_id = -1;

  bool operator==(const EpisodeRecord&) const = default;
};

struct StepOutcome {
  Observation observation;  // encoding of the next request; zeros when done
  Money reward;
  bool accepted = false;
  std::optional<CostBreakdown> breakdown;
  bool done = false;
  Request request;  // the request this step decided
  int action_index = 0;  // after infeasible choices are coerced to reject
};

/// Serverless edge cluster presenting one request per decision step.
///
/// Containers reserve their function's memory from creation until eviction.
/// A new container is busy for `duration_slots`, then stays warm and idle for
/// `keepalive_slots`; reusing it restarts both windows. Value-semantic: copies
/// are independent snapshots (the exhaustive oracle relies on this).
class Environment {
 public:
  Environment(std::shared_ptr<const Topology> topology, Catalog catalog, CostParams costs, EnvParams params = {})
      : topology_(std::move(topology)),
        catalog_(std::move(catalog)),
        costs_(costs),
        params_(params),
        actions_(topology_->size()) {
    validate_catalog(catalog_);
    costs_.validate();
    params_.validate();
  }

  const Topology& topology() const { return *topology_; }
  std::shared_ptr<const Topology> topology_ptr() const { return topology_; }
  const Catalog& catalog() const { return catalog_; }
  const CostParams& costs() const { return costs_; }
  const EnvParams& params() const { return params_; }
  const ActionSpace& action_space() const { return actions_; }

  std::size_t n_nodes() const { return topology_->size(); }
  std::size_t n_functions() const { return catalog_.size(); }
  std::size_t observation_size() const { return 2 * n_nodes() + n_nodes() * n_functions() + n_functions(); }
  std::size_t action_count() const { return actions_.size(); }

  Observation reset(Trace trace) { return reset(std::make_shared<const Trace>(std::move(trace))); }

  Observation reset(std::shared_ptr<const Trace> trace) {
    if (!trace || trace->empty()) throw ValidationError("cannot reset with an empty trace");
    for (const auto& r : *trace) {
      if (!topology_->valid_id(r.origin)) {
        throw ValidationError("request origin " + std::to_string(r.origin) + " is not a node of the topology");
      }
      if (r.fn_type < 0 || static_cast<std::size_t>(r.fn_type) >= catalog_.size()) {
        throw ValidationError("request function " + std::to_string(r.fn_type) + " is not in the catalog");
      }
    }
    if (!is_sorted_trace(*trace)) throw ValidationError("trace is not sorted by time slot");
    trace_ = std::move(trace);
    cursor_ = 0;
    clock_ = trace_->front().t;
    containers_.clear();
    next_container_id_ = 0;
    free_mem_.resize(n_nodes());
    for (std::size_t v = 0; v < n_nodes(); ++v) free_mem_[v] = topology_->nodes()[v].mem_mb;
    log_.clear();
    accepted_ = 0;
    episode_cost_ = Money::zero();
    return encode_observation();
  }

  bool started() const { return trace_ != nullptr; }
  bool done() const { return !trace_ || cursor_ >= trace_->size(); }
  Slot clock() const { return clock_; }
  std::size_t cursor() const { return cursor_; }
  const Trace& trace() const { return *trace_; }

  const Request& current_request() const {
    if (done()) throw StateError("no current request: episode is done");
    return (*trace_)[cursor_];
  }

  double free_mem(NodeId v) const { return free_mem_.at(static_cast<std::size_t>(v)); }
  const std::vector<Container>& containers() const { return containers_; }

  /// f_v^n: containers of type n on node v, busy or warm.
  int container_count(NodeId v, FunctionId n) const {
    return static_cast<int>(std::count_if(containers_.begin(), containers_.end(),
                                          [&](const Container& c) { return c.node == v && c.fn_type == n; }));
  }

  /// Price of `a` for the current request, or nullopt when it violates
  /// capacity, routing, warm-availability or budget.
  std::optional<CostBreakdown> quote(const Action& a) const {
    const Request& req = current_request();
    if (!topology_->valid_id(a.target)) return std::nullopt;
    const FunctionType& fn = catalog_[static_cast<std::size_t>(req.fn_type)];
    if (topology_->hops(req.origin, a.target) == kUnreachable) return std::nullopt;
    if (a.spawn_new) {
      if (free_mem_[static_cast<std::size_t>(a.target)] < fn.mem_mb) return std::nullopt;
    } else if (find_idle(a.target, req.fn_type) == nullptr) {
      return std::nullopt;
    }
    auto cost = placement_cost(costs_, fn, *topology_, req.origin, a.target, a.spawn_new);
    if (cost.total > req.budget) return std::nullopt;
    return cost;
  }

  std::vector<Action> feasible_actions() const {
    std::vector<Action> out;
    for (NodeId v = 0; v < static_cast<NodeId>(n_nodes()); ++v) {
      for (bool g : {false, true}) {
        if (quote(Action{v, g})) out.push_back(Action{v, g});
      }
    }
    return out;
  }

  /// Feasibility bitmask over the flat action space; reject is always set.
  ActionMask action_mask() const {
    ActionMask mask(action_count(), 0);
    if (done()) {
      mask[static_cast<std::size_t>(actions_.reject_index())] = 1;
      return mask;
    }
    for (const auto& a : feasible_actions()) mask[static_cast<std::size_t>(actions_.index(a))] = 1;
    mask[static_cast<std::size_t>(actions_.reject_index())] = 1;
    return mask;
  }

  StepOutcome step(int action_index, double decision_us = 0.0) {
    return step(actions_.decode(action_index), decision_us);
  }

  /// Applies `choice` (nullopt = reject). Infeasible placements are coerced
  /// to a rejection with the same penalty.
  StepOutcome step(const std::optional<Action>& choice, double decision_us = 0.0) {
    if (done()) throw StateError("step called after the episode is done");
    const Request req = current_request();
    const FunctionType& fn = catalog_[static_cast<std::size_t>(req.fn_type)];

    StepOutcome out;
    out.request = req;
    EpisodeRecord rec;
    rec.episode = episode_;
    rec.request = req;
    rec.decision_us = decision_us;

    std::optional<CostBreakdown> cost;
    if (choice) cost = quote(*choice);
    if (cost) {
      const Action a = *choice;
      Container* c = nullptr;
      if (a.spawn_new) {
        containers_.push_back(Container{next_container_id_++, a.target, req.fn_type, 0, 0});
        c = &containers_.back();
        free_mem_[static_cast<std::size_t>(a.target)] -= fn.mem_mb;
      } else {
        c = find_idle(a.target, req.fn_type);
      }
      c->busy_until = clock_ + fn.duration_slots;
      c->warm_until = c->busy_until + params_.keepalive_slots;

      out.accepted = true;
      out.breakdown = cost;
      out.reward = -cost->total;
      out.action_index = actions_.index(a);
      rec.target = a.target;
      rec.spawned = a.spawn_new;
      rec.accepted = true;
      rec.breakdown = *cost;
      rec.container_id = c->id;
      ++accepted_;
      episode_cost_ += cost->total;
    } else {
      out.accepted = false;
      out.reward = -costs_.reject_penalty;
      out.action_index = actions_.reject_index();
      episode_cost_ += costs_.reject_penalty;
    }
    rec.reward = out.reward;
    if (logging_) log_.push_back(rec);

    ++cursor_;
    if (!done()) advance_clock((*trace_)[cursor_].t);
    out.done = done();
    out.observation = done() ? Observation(observation_size(), 0.0) : encode_observation();
    return out;
  }

  /// [free_mem/capacity]_v, [min(f,F)/F]_{v,n} row-major, one-hot origin,
  /// one-hot function type.
  Observation encode_observation() const {
    const Request& req = current_request();
    const std::size_t nv = n_nodes();
    const std::size_t nf = n_functions();
    Observation obs(observation_size(), 0.0);
    for (std::size_t v = 0; v < nv; ++v) obs[v] = free_mem_[v] / topology_->nodes()[v].mem_mb;
    const double cap = static_cast<double>(params_.f_cap);
    for (const auto& c : containers_) {
      obs[nv + static_cast<std::size_t>(c.node) * nf + static_cast<std::size_t>(c.fn_type)] += 1.0;
    }
    for (std::size_t i = nv; i < nv + nv * nf; ++i) obs[i] = std::min(obs[i], cap) / cap;
    obs[nv + nv * nf + static_cast<std::size_t>(req.origin)] = 1.0;
    obs[2 * nv + nv * nf + static_cast<std::size_t>(req.fn_type)] = 1.0;
    return obs;
  }

  void set_episode(int episode) { episode_ = episode; }
  int episode() const { return episode_; }
  void set_logging(bool on) { logging_ = on; }
  const std::vector<EpisodeRecord>& episode_log() const { return log_; }
  std::size_t accepted_count() const { return accepted_; }

  /// Accepted totals plus rejection penalties so far (the negated return).
  Money episode_cost() const { return episode_cost_; }

 private:
  Container* find_idle(NodeId v, FunctionId n) {
    for (auto& c : containers_) {
      if (c.node == v && c.fn_type == n && c.idle_at(clock_)) return &c;
    }
    return nullptr;
  }
  const Container* find_idle(NodeId v, FunctionId n) const {
    return const_cast<Environment*>(this)->find_idle(v, n);
  }

  void advance_clock(Slot next) {
    clock_ = next;
    auto expired = [&](const Container& c) { return c.warm_until < clock_; };
    for (const auto& c : containers_) {
      if (expired(c)) free_mem_[static_cast<std::size_t>(c.node)] += catalog_[static_cast<std::size_t>(c.fn_type)].mem_mb;
    }
    containers_.erase(std::remove_if(containers_.begin(), containers_.end(), expired), containers_.end());
  }

  std::shared_ptr<const Topology> topology_;
  Catalog catalog_;
  CostParams costs_;
  EnvParams params_;
  ActionSpace actions_;

  std::shared_ptr<const Trace> trace_;
  std::size_t cursor_ = 0;
  Slot clock_ = 0;
  std::vector<double> free_mem_;
  std::vector<Container> containers_;
  std::int64_t next_container_id_ = 0;
  std::vector<EpisodeRecord> log_;
  bool logging_ = true;
  int episode_ = 0;
  std::size_t accepted_ = 0;
  Money episode_cost_;
};

inline void write_episode_log(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("episode", "t", "origin", "function", "target", "spawned", "accepted", "c_s", "c_e", "c_t", "total",
        "reward", "decision_us");
  for (const auto& r : records) {
    w.row(r.episode, r.request.t, r.request.origin, r.request.fn_type, r.target, r.spawned ? 1 : 0,
          r.accepted ? 1 : 0, r.breakdown.c_s.str(), r.breakdown.c_e.str(), r.breakdown.c_t.str(),
          r.breakdown.total.str(), r.reward.str(), csv::format_double(r.decision_us));
  }
}

}  // namespace edgesched
