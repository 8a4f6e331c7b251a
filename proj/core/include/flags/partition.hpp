#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flags/dataset.hpp"

namespace flags {

// node -> disjoint lists of sample indices into one source dataset.
struct Partition {
  std::vector<std::vector<std::size_t>> assignments;
  std::size_t source_size = 0;

  std::size_t node_count() const noexcept { return assignments.size(); }
  std::vector<double> sizes() const;
  std::size_t total_assigned() const;

  // Disjointness, index range and non-empty nodes; throws InvalidArgument.
  void validate() const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Shuffled, near-equal split (sizes differ by at most one).
Partition partition_iid(const LabeledDataset& d, std::size_t n, std::uint64_t seed);

// Per class, a Dirichlet(alpha) proportion vector over nodes decides how the
// class's shuffled indices are cut. Nodes left empty take one sample from the
// currently largest node.
Partition partition_dirichlet(const LabeledDataset& d, std::size_t n, double alpha,
                              std::uint64_t seed);

// Each node gets classes_per_node distinct classes (assigned to keep class
// load balanced, ties broken at random). A class's shuffled indices are cut
// into shards of shard_size; every node sharing the class draws between 1
// and floor(shards / sharers) of them.
Partition partition_shards(const LabeledDataset& d, std::size_t n, int classes_per_node,
                           std::size_t shard_size, std::uint64_t seed);

// Mean over nodes of the total-variation distance between the node's label
// distribution and the distribution over the whole source dataset.
double mean_label_tv_distance(const LabeledDataset& d, const Partition& p);

nlohmann::json to_json(const Partition& p);
Partition partition_from_json(const nlohmann::json& j);

}  // namespace flags
