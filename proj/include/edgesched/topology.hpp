#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "edgesched/csv.hpp"
#include "edgesched/error.hpp"
#include "edgesched/rng.hpp"

namespace edgesched {

using NodeId = int;

/// Hop count between two nodes; `kUnreachable` marks disconnected pairs.
using HopCount = int;
inline constexpr HopCount kUnreachable = std::numeric_limits<HopCount>::max();

struct EdgeNode {
  NodeId id = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  double cpu_ghz = 0.0;
  double mem_mb = 0.0;

  bool operator==(const EdgeNode&) const = default;
};

struct NodeClass {
  double cpu_ghz = 0.0;
  double mem_mb = 0.0;
};

/// Immutable edge-network graph with precomputed all-pairs hop distances.
class Topology {
 public:
  using Edge = std::pair<NodeId, NodeId>;  // normalized: first < second

  Topology(std::vector<EdgeNode> nodes, std::set<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    validate();
    compute_hops();
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<EdgeNode>& nodes() const { return nodes_; }
  const EdgeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::set<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool valid_id(NodeId id) const { return id >= 0 && static_cast<std::size_t>(id) < nodes_.size(); }

  HopCount hops(NodeId u, NodeId w) const {
    if (!valid_id(u) || !valid_id(w)) {
      throw ValidationError("node id out of range: " + std::to_string(u) + "," + std::to_string(w));
    }
    return hops_[static_cast<std::size_t>(u) * nodes_.size() + static_cast<std::size_t>(w)];
  }

  std::vector<NodeId> neighbors(NodeId u) const {
    std::vector<NodeId> out;
    for (const auto& [a, b] : edges_) {
      if (a == u) out.push_back(b);
      if (b == u) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  bool operator==(const Topology& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

  static Edge normalize(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

 private:
  void validate() {
    std::vector<bool> seen(nodes_.size(), false);
    for (const auto& n : nodes_) {
      if (n.id < 0 || static_cast<std::size_t>(n.id) >= nodes_.size()) {
        throw ValidationError("node id " + std::to_string(n.id) + " is not in [0, " +
                              std::to_string(nodes_.size()) + ")");
      }
      if (seen[static_cast<std::size_t>(n.id)]) {
        throw ValidationError("duplicate node id " + std::to_string(n.id));
      }
      seen[static_cast<std::size_t>(n.id)] = true;
      if (!(n.cpu_ghz > 0.0)) throw ValidationError("node " + std::to_string(n.id) + ": cpu_ghz must be > 0");
      if (!(n.mem_mb > 0.0)) throw ValidationError("node " + std::to_string(n.id) + ": mem_mb must be > 0");
    }
    std::sort(nodes_.begin(), nodes_.end(), [](const EdgeNode& a, const EdgeNode& b) { return a.id < b.id; });
    for (const auto& [a, b] : edges_) {
      if (!valid_id(a) || !valid_id(b) || a >= b) {
        throw ValidationError("invalid edge " + std::to_string(a) + "-" + std::to_string(b));
      }
    }
  }

  // BFS from every node over the unweighted edge set.
  void compute_hops() {
    const std::size_t n = nodes_.size();
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto& [a, b] : edges_) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    hops_.assign(n * n, kUnreachable);
    for (std::size_t s = 0; s < n; ++s) {
      HopCount* row = &hops_[s * n];
      row[s] = 0;
      std::queue<NodeId> frontier;
      frontier.push(static_cast<NodeId>(s));
      while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (NodeId w : adj[static_cast<std::size_t>(u)]) {
          if (row[w] == kUnreachable) {
            row[w] = row[u] + 1;
            frontier.push(w);
          }
        }
      }
    }
    for (std::size_t v = 0; v < n && n > 1; ++v) {
      if (adj[v].empty()) warnings_.push_back("node " + std::to_string(v) + " is isolated");
    }
  }

  std::vector<EdgeNode> nodes_;
  std::set<Edge> edges_;
  std::vector<HopCount> hops_;
  std::vector<std::string> warnings_;
};

/// Joins every node pair whose Euclidean distance is at most `radius_m`.
inline std::set<Topology::Edge> radius_edges(const std::vector<EdgeNode>& nodes, double radius_m) {
  std::set<Topology::Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const double d = std::hypot(nodes[i].x_m - nodes[j].x_m, nodes[i].y_m - nodes[j].y_m);
      if (d <= radius_m) edges.insert(Topology::normalize(nodes[i].id, nodes[j].id));
    }
  }
  return edges;
}

inline std::vector<EdgeNode> load_nodes_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, path, 5, {"node_id", "x_m", "y_m", "cpu_ghz", "mem_mb"});
  std::vector<EdgeNode> nodes;
  std::set<NodeId> ids;
  for (const auto& row : table.rows) {
    const auto ctx = csv::where(path, row);
    if (row.fields.size() != 5) throw ParseError(ctx + ": expected 5 fields, got " + std::to_string(row.fields.size()));
    EdgeNode n;
    n.id = csv::parse_number<int>(row.fields[0], ctx);
    n.x_m = csv::parse_number<double>(row.fields[1], ctx);
    n.y_m = csv::parse_number<double>(row.fields[2], ctx);
    n.cpu_ghz = csv::parse_number<double>(row.fields[3], ctx);
    n.mem_mb = csv::parse_number<double>(row.fields[4], ctx);
    if (!ids.insert(n.id).second) throw ValidationError(ctx + ": duplicate node id " + std::to_string(n.id));
    nodes.push_back(n);
  }
  return nodes;
}

inline std::set<Topology::Edge> load_edges_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, path, 2, {"src", "dst"});
  std::set<Topology::Edge> edges;
  for (const auto& row : table.rows) {
    const auto ctx = csv::where(path, row);
    if (row.fields.size() != 2) throw ParseError(ctx + ": expected 2 fields");
    const auto a = csv::parse_number<int>(row.fields[0], ctx);
    const auto b = csv::parse_number<int>(row.fields[1], ctx);
    if (a == b) throw ValidationError(ctx + ": self loop on node " + std::to_string(a));
    edges.insert(Topology::normalize(a, b));
  }
  return edges;
}

/// Loads nodes plus either an explicit edge list or a connection radius.
inline Topology load_topology(const std::filesystem::path& nodes_file,
                              const std::optional<std::filesystem::path>& edges_file,
                              std::optional<double> radius_m) {
  if (edges_file.has_value() == radius_m.has_value()) {
    throw ValidationError("exactly one of edges_file / radius_m must be supplied");
  }
  auto nodes = load_nodes_csv(nodes_file);
  auto edges = edges_file ? load_edges_csv(*edges_file) : radius_edges(nodes, *radius_m);
  return Topology(std::move(nodes), std::move(edges));
}

inline void save_topology(const Topology& topo, const std::filesystem::path& nodes_file,
                          const std::filesystem::path& edges_file) {
  {
    csv::Writer w(nodes_file);
    w.row("node_id", "x_m", "y_m", "cpu_ghz", "mem_mb");
    for (const auto& n : topo.nodes()) {
      w.row(n.id, csv::format_double(n.x_m), csv::format_double(n.y_m), csv::format_double(n.cpu_ghz),
            csv::format_double(n.mem_mb));
    }
  }
  csv::Writer w(edges_file);
  w.row("src", "dst");
  for (const auto& [a, b] : topo.edges()) w.row(a, b);
}

/// Random placement in an `area_m` square; classes are assigned round-robin
/// and then shuffled.
inline Topology generate_topology(std::size_t n_nodes, const std::vector<NodeClass>& node_classes,
                                  double area_m, double radius_m, std::uint64_t seed) {
  if (n_nodes < 1) throw ValidationError("n_nodes must be >= 1");
  if (node_classes.empty()) throw ValidationError("node_classes must not be empty");
  Rng rng(seed);
  std::vector<std::size_t> klass(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) klass[i] = i % node_classes.size();
  for (std::size_t i = n_nodes - 1; i > 0; --i) {
    std::swap(klass[i], klass[uniform_index(rng, i + 1)]);
  }
  std::vector<EdgeNode> nodes(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    auto& n = nodes[i];
    n.id = static_cast<NodeId>(i);
    n.x_m = uniform01(rng) * area_m;
    n.y_m = uniform01(rng) * area_m;
    n.cpu_ghz = node_classes[klass[i]].cpu_ghz;
    n.mem_mb = node_classes[klass[i]].mem_mb;
  }
  auto edges = radius_edges(nodes, radius_m);
  return Topology(std::move(nodes), std::move(edges));
}

/// Five node classes evenly covering 2.4-3.6 GHz and 16-24 GB.
inline std::vector<NodeClass> default_node_classes() {
  return {{2.4, 16384.0}, {2.7, 18432.0}, {3.0, 20480.0}, {3.3, 22528.0}, {3.6, 24576.0}};
}

}  // namespace edgesched
