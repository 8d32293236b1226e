#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "edgesched/costs.hpp"
#include "edgesched/csv.hpp"
#include "edgesched/error.hpp"
#include "edgesched/function_type.hpp"
#include "edgesched/rng.hpp"
#include "edgesched/topology.hpp"

namespace edgesched {

using Slot = std::int64_t;
using Catalog = std::vector<FunctionType>;

struct Request {
  Slot t = 0;
  NodeId origin = 0;
  FunctionId fn_type = 0;
  Money budget;

  bool operator==(const Request&) const = default;
};

using Trace = std::vector<Request>;

inline void validate_catalog(const Catalog& catalog) {
  if (catalog.empty()) throw ValidationError("function catalog is empty");
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& f = catalog[i];
    const auto tag = "function " + std::to_string(f.id);
    if (f.id != static_cast<FunctionId>(i)) throw ValidationError(tag + ": ids must be dense 0..N-1 in order");
    if (!(f.mem_mb > 0.0)) throw ValidationError(tag + ": mem_mb must be > 0");
    if (f.duration_slots < 1) throw ValidationError(tag + ": duration_slots must be >= 1");
    if (f.budget <= Money::zero()) throw ValidationError(tag + ": budget must be > 0");
  }
}

/// Memory sizes of the four default container types (MB).
inline constexpr double kDefaultFunctionSizes[] = {20.0, 100.0, 180.0, 250.0};

/// Budget rule: `factor` times the mean over `reference_nodes` of the
/// running cost of one invocation.
inline Money default_budget(const FunctionType& fn, const std::vector<EdgeNode>& reference_nodes,
                            const CostParams& params, double factor = 3.0) {
  double sum = 0.0;
  for (const auto& node : reference_nodes) sum += running_cost(params, fn, node).to_double();
  return Money::from_double(factor * sum / static_cast<double>(reference_nodes.size()));
}

inline Catalog default_catalog(const std::vector<EdgeNode>& reference_nodes, const CostParams& params,
                               double budget_factor = 3.0) {
  if (reference_nodes.empty()) throw ValidationError("reference topology is empty");
  Catalog catalog;
  for (std::size_t i = 0; i < std::size(kDefaultFunctionSizes); ++i) {
    FunctionType fn{static_cast<FunctionId>(i), kDefaultFunctionSizes[i], 1, Money::zero()};
    fn.budget = default_budget(fn, reference_nodes, params, budget_factor);
    catalog.push_back(fn);
  }
  return catalog;
}

/// Catalog priced against one node of each default hardware class.
inline Catalog default_catalog() {
  std::vector<EdgeNode> reference;
  for (const auto& c : default_node_classes()) {
    reference.push_back(EdgeNode{static_cast<NodeId>(reference.size()), 0.0, 0.0, c.cpu_ghz, c.mem_mb});
  }
  return default_catalog(reference, CostParams{});
}

inline void sort_trace(Trace& trace) {
  std::stable_sort(trace.begin(), trace.end(), [](const Request& a, const Request& b) { return a.t < b.t; });
}

inline bool is_sorted_trace(const Trace& trace) {
  return std::is_sorted(trace.begin(), trace.end(), [](const Request& a, const Request& b) { return a.t < b.t; });
}

namespace detail {

// Knuth's product method in chunks of mean <= 16 so exp() never underflows.
inline std::uint64_t sample_poisson(Rng& rng, double mean) {
  std::uint64_t count = 0;
  while (mean > 0.0) {
    const double chunk = std::min(mean, 16.0);
    mean -= chunk;
    const double limit = std::exp(-chunk);
    double prod = uniform01(rng);
    while (prod > limit) {
      ++count;
      prod *= uniform01(rng);
    }
  }
  return count;
}

}  // namespace detail

/// Poisson arrivals per slot, uniform origins, function type drawn from `mix`.
inline Trace generate_trace(const Topology& topology, const Catalog& catalog, Slot horizon, double arrival_rate,
                            const std::vector<double>& mix, std::uint64_t seed) {
  if (catalog.empty()) throw ValidationError("function catalog is empty");
  if (mix.size() != catalog.size()) throw ValidationError("mix must have one weight per function type");
  if (!(arrival_rate >= 0.0)) throw ValidationError("arrival_rate must be >= 0");
  if (std::any_of(mix.begin(), mix.end(), [](double w) { return !(w >= 0.0); })) {
    throw ValidationError("mix weights must be >= 0");
  }
  const double total = std::accumulate(mix.begin(), mix.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mix must sum to 1");

  std::vector<double> cumulative(mix.size());
  std::partial_sum(mix.begin(), mix.end(), cumulative.begin());

  Rng rng(seed);
  Trace trace;
  for (Slot t = 0; t < horizon; ++t) {
    const auto count = detail::sample_poisson(rng, arrival_rate);
    for (std::uint64_t k = 0; k < count; ++k) {
      Request r;
      r.t = t;
      r.origin = static_cast<NodeId>(uniform_index(rng, topology.size()));
      const double u = uniform01(rng) * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      // Skip zero-weight types that upper_bound can land on at the boundary.
      while (mix[static_cast<std::size_t>(it - cumulative.begin())] == 0.0 && it != cumulative.begin()) --it;
      r.fn_type = static_cast<FunctionId>(it - cumulative.begin());
      r.budget = catalog[static_cast<std::size_t>(r.fn_type)].budget;
      trace.push_back(r);
    }
  }
  return trace;
}

/// Reads `t,origin_node,function_id[,budget]`. Out-of-order rows are stably
/// sorted and a warning is appended to `warnings` when supplied.
inline Trace load_trace(const std::filesystem::path& path, const Catalog& catalog,
                        std::vector<std::string>* warnings = nullptr) {
  const auto table = csv::read(path);
  csv::expect_header(table, path, 3, {"t", "origin_node", "function_id", "budget"});
  const bool has_budget = table.header.size() == 4;
  Trace trace;
  for (const auto& row : table.rows) {
    const auto ctx = csv::where(path, row);
    if (row.fields.size() != table.header.size()) throw ParseError(ctx + ": wrong number of fields");
    Request r;
    r.t = csv::parse_number<Slot>(row.fields[0], ctx);
    r.origin = csv::parse_number<int>(row.fields[1], ctx);
    r.fn_type = csv::parse_number<int>(row.fields[2], ctx);
    if (r.t < 0) throw ValidationError(ctx + ": negative time slot");
    if (r.fn_type < 0 || static_cast<std::size_t>(r.fn_type) >= catalog.size()) {
      throw ValidationError(ctx + ": unknown function_id " + std::to_string(r.fn_type));
    }
    r.budget = catalog[static_cast<std::size_t>(r.fn_type)].budget;
    if (has_budget && !row.fields[3].empty()) {
      try {
        r.budget = Money::parse(row.fields[3]);
      } catch (const ParseError& e) {
        throw ParseError(ctx + ": " + e.what());
      }
    }
    trace.push_back(r);
  }
  if (!is_sorted_trace(trace)) {
    sort_trace(trace);
    if (warnings) warnings->push_back(path.string() + ": rows not sorted by t; stably sorted");
  }
  return trace;
}

inline void save_trace(const Trace& trace, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("t", "origin_node", "function_id", "budget");
  for (const auto& r : trace) w.row(r.t, r.origin, r.fn_type, r.budget.str());
}

inline Catalog load_catalog(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, path, 4, {"function_id", "mem_mb", "duration_slots", "budget"});
  Catalog catalog;
  for (const auto& row : table.rows) {
    const auto ctx = csv::where(path, row);
    if (row.fields.size() != 4) throw ParseError(ctx + ": expected 4 fields");
    FunctionType f;
    f.id = csv::parse_number<int>(row.fields[0], ctx);
    f.mem_mb = csv::parse_number<double>(row.fields[1], ctx);
    f.duration_slots = csv::parse_number<int>(row.fields[2], ctx);
    try {
      f.budget = Money::parse(row.fields[3]);
    } catch (const ParseError& e) {
      throw ParseError(ctx + ": " + e.what());
    }
    catalog.push_back(f);
  }
  std::sort(catalog.begin(), catalog.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  validate_catalog(catalog);
  return catalog;
}

inline void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("function_id", "mem_mb", "duration_slots", "budget");
  for (const auto& f : catalog) w.row(f.id, csv::format_double(f.mem_mb), f.duration_slots, f.budget.str());
}

}  // namespace edgesched
