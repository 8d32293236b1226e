#pragma once

#include <optional>
#include <string>

#include "edgesched/error.hpp"
#include "edgesched/function_type.hpp"
#include "edgesched/money.hpp"
#include "edgesched/topology.hpp"

namespace edgesched {

/// Coefficients behind the switching, running and routing prices.
///
///   switching q  = alpha_switch * u / f        (cold start, cheaper on fast CPUs)
///   running   e  = beta_run * u * f            (per slot, dearer on fast CPUs)
///   routing   d  = delta_route * u * hops      (traffic volume is the function size)
struct CostParams {
  double alpha_switch = 0.01;
  double beta_run = 0.002;
  double delta_route = 0.003;
  Money reject_penalty = Money::from_micros(5'000'000);

  void validate() const {
    if (!(alpha_switch >= 0.0) || !(beta_run >= 0.0) || !(delta_route >= 0.0) ||
        reject_penalty < Money::zero()) {
      throw ValidationError("cost coefficients must be >= 0");
    }
  }
};

struct CostBreakdown {
  Money c_s;
  Money c_e;
  Money c_t;
  Money total;

  bool operator==(const CostBreakdown&) const = default;
};

inline Money switching_cost(const CostParams& p, const FunctionType& fn, const EdgeNode& node) {
  return Money::from_double(p.alpha_switch * fn.mem_mb / node.cpu_ghz);
}

/// Per-slot price, rounded once and then multiplied so cost is exactly
/// linear in duration.
inline Money running_cost_per_slot(const CostParams& p, const FunctionType& fn, const EdgeNode& node) {
  return Money::from_double(p.beta_run * fn.mem_mb * node.cpu_ghz);
}

inline Money running_cost(const CostParams& p, const FunctionType& fn, const EdgeNode& node) {
  return running_cost_per_slot(p, fn, node) * fn.duration_slots;
}

/// nullopt when the pair is disconnected; such placements are infeasible.
inline std::optional<Money> routing_cost(const CostParams& p, const FunctionType& fn, const Topology& topo,
                                         NodeId origin, NodeId target) {
  const HopCount h = topo.hops(origin, target);
  if (h == kUnreachable) return std::nullopt;
  if (h == 0) return Money::zero();
  return Money::from_double(p.delta_route * fn.mem_mb) * h;
}

inline CostBreakdown placement_cost(const CostParams& p, const FunctionType& fn, const Topology& topo,
                                    NodeId origin, NodeId target, bool spawn_new) {
  const auto route = routing_cost(p, fn, topo, origin, target);
  if (!route) {
    throw InfeasiblePlacement("no route from node " + std::to_string(origin) + " to node " +
                              std::to_string(target));
  }
  const EdgeNode& node = topo.node(target);
  CostBreakdown b;
  b.c_s = spawn_new ? switching_cost(p, fn, node) : Money::zero();
  b.c_e = running_cost(p, fn, node);
  b.c_t = *route;
  b.total = b.c_s + b.c_e + b.c_t;
  return b;
}

}  // namespace edgesched
