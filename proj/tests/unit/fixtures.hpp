#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "flags/aggregation.hpp"
#include "flags/metrics.hpp"
#include "flags/mlp.hpp"
#include "flags/topology.hpp"

namespace flags::testing {

// Scalar "models": one parameter, so averages can be checked by hand.
inline ModelParams scalar(double v) { return {{v}, 1}; }

inline ModelParams vec(std::vector<double> v) { return {std::move(v), 1}; }

inline Topology make_topology(std::vector<ClusterId> cluster_of, std::vector<Edge> edges,
                              std::vector<NodeId> heads) {
  return Topology(std::move(cluster_of), edges, std::move(heads), 1.0, 0.0);
}

// Complete graph on n nodes, one cluster headed by node 0.
inline Topology complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  return make_topology(std::vector<ClusterId>(n, 0), edges, {0});
}

// Ring on n nodes (2-regular), one cluster.
inline Topology ring(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a) edges.emplace_back(std::min(a, (a + 1) % n), std::max(a, (a + 1) % n));
  return make_topology(std::vector<ClusterId>(n, 0), edges, {0});
}

class CountingSink : public MessageSink {
 public:
  void record_message(Link link, int) override { ++counts[static_cast<int>(link)]; }
  std::uint64_t d2d() const { return counts[0]; }
  std::uint64_t d2e() const { return counts[1]; }
  std::uint64_t e2c() const { return counts[2]; }
  std::uint64_t counts[3] = {0, 0, 0};
};

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flags_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flags::testing
