#include "flags/topology.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include <nlohmann/json.hpp>

#include "flags/error.hpp"
#include "flags/hash.hpp"
#include "flags/rng.hpp"

namespace flags {

Topology::Topology(std::vector<ClusterId> cluster_of, const std::vector<Edge>& edges,
                   std::vector<NodeId> cluster_heads, double gamma, double upsilon)
    : cluster_of_(std::move(cluster_of)),
      heads_(std::move(cluster_heads)),
      gamma_(gamma),
      upsilon_(upsilon) {
  const std::size_t n = cluster_of_.size();
  const std::size_t c = heads_.size();
  if (n == 0) throw InvalidArgument("topology needs at least one node");
  if (c == 0 || c > n) throw InvalidArgument("cluster count must be in [1, node_count]");
  if (!(gamma >= 0.0 && gamma <= 1.0 && upsilon >= 0.0 && upsilon <= 1.0))
    throw InvalidArgument("link probabilities must lie in [0, 1]");

  members_.assign(c, {});
  for (NodeId k = 0; k < n; ++k) {
    if (cluster_of_[k] >= c)
      throw InvalidArgument("node " + std::to_string(k) + " assigned to unknown cluster");
    members_[cluster_of_[k]].push_back(k);
  }
  for (ClusterId i = 0; i < c; ++i) {
    if (members_[i].empty())
      throw InvalidArgument("cluster " + std::to_string(i) + " is empty");
    if (heads_[i] >= n || cluster_of_[heads_[i]] != i)
      throw InvalidArgument("head of cluster " + std::to_string(i) + " is not a member");
  }

  adjacency_.assign(n, {});
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw InvalidArgument("edge references unknown node");
    if (a == b) throw InvalidArgument("self-loops are not allowed");
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    if (std::adjacent_find(adj.begin(), adj.end()) != adj.end())
      throw InvalidArgument("duplicate edge");
    edge_count_ += adj.size();
  }
  edge_count_ /= 2;
}

ClusterId Topology::cluster_of(NodeId k) const {
  if (k >= node_count()) throw std::out_of_range("unknown node id " + std::to_string(k));
  return cluster_of_[k];
}

NodeId Topology::cluster_head(ClusterId c) const {
  if (c >= cluster_count()) throw std::out_of_range("unknown cluster id " + std::to_string(c));
  return heads_[c];
}

std::span<const NodeId> Topology::members(ClusterId c) const {
  if (c >= cluster_count()) throw std::out_of_range("unknown cluster id " + std::to_string(c));
  return members_[c];
}

std::span<const NodeId> Topology::neighbors(NodeId k) const {
  if (k >= node_count()) throw std::out_of_range("unknown node id " + std::to_string(k));
  return adjacency_[k];
}

bool Topology::has_edge(NodeId a, NodeId b) const {
  auto adj = neighbors(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

std::vector<Edge> Topology::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (NodeId a = 0; a < adjacency_.size(); ++a)
    for (NodeId b : adjacency_[a])
      if (a < b) out.emplace_back(a, b);
  return out;
}

Topology generate_topology(std::size_t n, std::size_t c, double gamma,
                           double upsilon, std::uint64_t seed) {
  if (c < 1 || n < c) throw InvalidArgument("need n >= c >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(upsilon >= 0.0 && upsilon <= gamma))
    throw InvalidArgument("need 0 <= upsilon <= gamma <= 1");

  Rng rng = make_rng(seed, Stream::topology);

  // Balanced assignment: shuffled ids dealt round-robin.
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ClusterId> cluster_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) cluster_of[order[pos]] = pos % c;

  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      const double p = cluster_of[a] == cluster_of[b] ? gamma : upsilon;
      if (uniform01(rng) < p) edges.emplace_back(a, b);
    }
  }

  std::vector<std::vector<NodeId>> members(c);
  for (NodeId k = 0; k < n; ++k) members[cluster_of[k]].push_back(k);
  std::vector<NodeId> heads(c);
  for (ClusterId i = 0; i < c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, members[i].size() - 1);
    heads[i] = members[i][pick(rng)];
  }
  return Topology(std::move(cluster_of), edges, std::move(heads), gamma, upsilon);
}

Topology generate_reachable_topology(std::size_t n, std::size_t c, double gamma,
                                     double upsilon, std::uint64_t seed,
                                     int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Topology t = generate_topology(n, c, gamma, upsilon, seed + static_cast<std::uint64_t>(attempt));
    if (is_reachable(t)) return t;
  }
  throw Error("no connected topology after " + std::to_string(max_attempts) +
              " attempts (n=" + std::to_string(n) + ", c=" + std::to_string(c) + ")");
}

bool is_reachable(const Topology& t) {
  const std::size_t n = t.node_count();
  std::vector<bool> seen(n, false);
  std::queue<NodeId> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    NodeId k = frontier.front();
    frontier.pop();
    for (NodeId j : t.neighbors(k)) {
      if (!seen[j]) {
        seen[j] = true;
        ++visited;
        frontier.push(j);
      }
    }
  }
  return visited == n;
}

nlohmann::json to_json(const Topology& t) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : t.edges()) edges.push_back({a, b});
  std::vector<ServerId> servers(t.node_count());
  for (NodeId k = 0; k < t.node_count(); ++k) servers[k] = t.edge_server_of(k);
  std::vector<NodeId> nodes(t.node_count());
  std::iota(nodes.begin(), nodes.end(), NodeId{0});
  return {
      {"node_count", t.node_count()},
      {"cluster_count", t.cluster_count()},
      {"gamma", t.gamma()},
      {"upsilon", t.upsilon()},
      {"nodes", nodes},
      {"clusters", t.cluster_assignment()},
      {"edges", std::move(edges)},
      {"cluster_heads", t.cluster_heads()},
      {"edge_server_of", servers},
  };
}

Topology topology_from_json(const nlohmann::json& j) {
  try {
    auto clusters = j.at("clusters").get<std::vector<ClusterId>>();
    auto heads = j.at("cluster_heads").get<std::vector<NodeId>>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    Topology t(std::move(clusters), edges, std::move(heads), j.value("gamma", 0.0),
               j.value("upsilon", 0.0));
    if (j.contains("edge_server_of")) {
      auto servers = j.at("edge_server_of").get<std::vector<ServerId>>();
      for (NodeId k = 0; k < t.node_count(); ++k)
        if (k >= servers.size() || servers[k] != t.edge_server_of(k))
          throw InvalidArgument("edge_server_of disagrees with cluster assignment");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("topology JSON: ") + e.what());
  }
}

std::uint64_t fingerprint(const Topology& t) {
  Fnv1a h;
  h.update_value(static_cast<std::uint64_t>(t.node_count()));
  for (ClusterId c : t.cluster_assignment()) h.update_value(static_cast<std::uint64_t>(c));
  for (NodeId k : t.cluster_heads()) h.update_value(static_cast<std::uint64_t>(k));
  for (auto [a, b] : t.edges()) {
    h.update_value(static_cast<std::uint64_t>(a));
    h.update_value(static_cast<std::uint64_t>(b));
  }
  return h.digest();
}

}  // namespace flags
