#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace flags {

using NodeId = std::size_t;
using ClusterId = std::size_t;
using ServerId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected device graph partitioned into clusters. Each cluster has one
// head (a member device) and one edge server; server ids equal cluster ids.
// Immutable once constructed.
class Topology {
 public:
  // Validates every structural invariant and throws InvalidArgument if one
  // is violated. Edges may be given in any order and orientation.
  Topology(std::vector<ClusterId> cluster_of, const std::vector<Edge>& edges,
           std::vector<NodeId> cluster_heads, double gamma = 0.0,
           double upsilon = 0.0);

  std::size_t node_count() const noexcept { return cluster_of_.size(); }
  std::size_t cluster_count() const noexcept { return heads_.size(); }
  std::size_t server_count() const noexcept { return heads_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  double gamma() const noexcept { return gamma_; }
  double upsilon() const noexcept { return upsilon_; }

  ClusterId cluster_of(NodeId k) const;
  ServerId edge_server_of(NodeId k) const { return cluster_of(k); }
  NodeId cluster_head(ClusterId c) const;
  bool is_cluster_head(NodeId k) const { return cluster_head(cluster_of(k)) == k; }
  std::span<const NodeId> members(ClusterId c) const;

  // Sorted 1-hop neighbourhood; may cross cluster boundaries.
  std::span<const NodeId> neighbors(NodeId k) const;
  std::size_t degree(NodeId k) const { return neighbors(k).size(); }
  bool has_edge(NodeId a, NodeId b) const;

  // Edges as (low, high) pairs in lexicographic order.
  std::vector<Edge> edges() const;

  const std::vector<ClusterId>& cluster_assignment() const noexcept { return cluster_of_; }
  const std::vector<NodeId>& cluster_heads() const noexcept { return heads_; }

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::vector<ClusterId> cluster_of_;
  std::vector<NodeId> heads_;
  std::vector<std::vector<NodeId>> members_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
  double gamma_ = 0.0;
  double upsilon_ = 0.0;
};

// Random clustered graph: balanced random cluster assignment, intra-cluster
// pairs linked with probability gamma, inter-cluster pairs with upsilon, one
// uniformly chosen head per cluster. No connectivity guarantee.
Topology generate_topology(std::size_t n, std::size_t c, double gamma,
                           double upsilon, std::uint64_t seed);

// Retries generate_topology with seed, seed+1, ... until the device graph is
// connected; throws Error after max_attempts.
Topology generate_reachable_topology(std::size_t n, std::size_t c, double gamma,
                                     double upsilon, std::uint64_t seed,
                                     int max_attempts = 100);

bool is_reachable(const Topology& t);

nlohmann::json to_json(const Topology& t);
Topology topology_from_json(const nlohmann::json& j);

// Stable 64-bit fingerprint of the graph structure (clusters, heads, edges).
std::uint64_t fingerprint(const Topology& t);

}  // namespace flags
