#include "flags/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "flags/error.hpp"
#include "flags/rng.hpp"

namespace flags {
namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& d) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(d.num_classes));
  for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(d.labels[i])].push_back(i);
  return out;
}

void check_common(const LabeledDataset& d, std::size_t n) {
  if (n == 0) throw InvalidArgument("partition needs at least one node");
  if (d.empty()) throw InvalidArgument("cannot partition an empty dataset");
  if (n > d.size())
    throw InvalidArgument("more nodes (" + std::to_string(n) + ") than samples (" +
                          std::to_string(d.size()) + ")");
}

}  // namespace

std::vector<double> Partition::sizes() const {
  std::vector<double> s;
  s.reserve(assignments.size());
  for (const auto& a : assignments) s.push_back(static_cast<double>(a.size()));
  return s;
}

std::size_t Partition::total_assigned() const {
  std::size_t total = 0;
  for (const auto& a : assignments) total += a.size();
  return total;
}

void Partition::validate() const {
  std::vector<bool> used(source_size, false);
  for (std::size_t k = 0; k < assignments.size(); ++k) {
    if (assignments[k].empty())
      throw InvalidArgument("node " + std::to_string(k) + " has no samples");
    for (std::size_t i : assignments[k]) {
      if (i >= source_size) throw InvalidArgument("sample index out of range");
      if (used[i]) throw InvalidArgument("sample " + std::to_string(i) + " assigned twice");
      used[i] = true;
    }
  }
}

Partition partition_iid(const LabeledDataset& d, std::size_t n, std::uint64_t seed) {
  check_common(d, n);
  Rng rng = make_rng(seed, Stream::partition, {0});
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  Partition p;
  p.source_size = d.size();
  p.assignments.resize(n);
  for (std::size_t pos = 0; pos < order.size(); ++pos) p.assignments[pos % n].push_back(order[pos]);
  return p;
}

Partition partition_dirichlet(const LabeledDataset& d, std::size_t n, double alpha,
                              std::uint64_t seed) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw InvalidArgument("dirichlet alpha must be positive");
  check_common(d, n);
  Rng rng = make_rng(seed, Stream::partition, {1});
  std::gamma_distribution<double> gamma(alpha, 1.0);

  Partition p;
  p.source_size = d.size();
  p.assignments.resize(n);
  std::vector<double> share(n);
  for (auto& idx : indices_by_class(d)) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double total = 0.0;
    for (auto& s : share) total += (s = gamma(rng));
    if (!(total > 0.0)) {
      // Every draw underflowed (tiny alpha): the whole class goes to one node.
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
      total = 1.0;
    }
    // Cut points floor(cumsum * count), last node takes the remainder.
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < n; ++k) {
      cumulative += share[k] / total;
      std::size_t end = k + 1 == n
                            ? idx.size()
                            : std::min(idx.size(), static_cast<std::size_t>(cumulative * idx.size()));
      end = std::max(end, begin);
      p.assignments[k].insert(p.assignments[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                              idx.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }

  for (auto& a : p.assignments) {
    if (!a.empty()) continue;
    auto largest = std::max_element(p.assignments.begin(), p.assignments.end(),
                                    [](const auto& x, const auto& y) { return x.size() < y.size(); });
    a.push_back(largest->back());
    largest->pop_back();
  }
  return p;
}

Partition partition_shards(const LabeledDataset& d, std::size_t n, int classes_per_node,
                           std::size_t shard_size, std::uint64_t seed) {
  check_common(d, n);
  if (classes_per_node < 1 || classes_per_node > d.num_classes)
    throw InvalidArgument("classes_per_node must be in [1, num_classes]");
  if (shard_size < 1) throw InvalidArgument("shard_size must be at least 1");
  Rng rng = make_rng(seed, Stream::partition, {2});

  const auto num_classes = static_cast<std::size_t>(d.num_classes);
  const auto per_node = static_cast<std::size_t>(classes_per_node);

  // Least-loaded classes first, random tie-break.
  std::vector<std::size_t> load(num_classes, 0);
  std::vector<std::vector<std::size_t>> node_classes(n);
  std::vector<std::vector<std::size_t>> sharers(num_classes);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::size_t> order(num_classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return load[a] < load[b]; });
    for (std::size_t j = 0; j < per_node; ++j) {
      node_classes[k].push_back(order[j]);
      sharers[order[j]].push_back(k);
      ++load[order[j]];
    }
  }

  Partition p;
  p.source_size = d.size();
  p.assignments.resize(n);
  auto by_class = indices_by_class(d);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (sharers[c].empty()) continue;
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t shards = (idx.size() + shard_size - 1) / shard_size;
    const std::size_t cap = shards / sharers[c].size();
    if (cap < 1)
      throw InvalidArgument("class " + std::to_string(c) + " has " + std::to_string(shards) +
                            " shards for " + std::to_string(sharers[c].size()) + " nodes");
    std::vector<std::size_t> shard_order(shards);
    std::iota(shard_order.begin(), shard_order.end(), std::size_t{0});
    std::shuffle(shard_order.begin(), shard_order.end(), rng);
    std::uniform_int_distribution<std::size_t> count(1, cap);
    std::size_t next = 0;
    for (std::size_t k : sharers[c]) {
      const std::size_t take = count(rng);
      for (std::size_t s = 0; s < take; ++s, ++next) {
        const std::size_t begin = shard_order[next] * shard_size;
        const std::size_t end = std::min(idx.size(), begin + shard_size);
        p.assignments[k].insert(p.assignments[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                idx.begin() + static_cast<std::ptrdiff_t>(end));
      }
    }
  }
  return p;
}

double mean_label_tv_distance(const LabeledDataset& d, const Partition& p) {
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto global = class_histogram(d, all);
  double sum = 0.0;
  for (const auto& a : p.assignments) {
    const auto local = class_histogram(d, a);
    double tv = 0.0;
    for (std::size_t c = 0; c < global.size(); ++c)
      tv += std::abs(static_cast<double>(local[c]) / static_cast<double>(a.size()) -
                     static_cast<double>(global[c]) / static_cast<double>(d.size()));
    sum += 0.5 * tv;
  }
  return sum / static_cast<double>(p.node_count());
}

nlohmann::json to_json(const Partition& p) {
  return {{"source_size", p.source_size}, {"assignments", p.assignments}};
}

Partition partition_from_json(const nlohmann::json& j) {
  try {
    Partition p;
    p.source_size = j.at("source_size").get<std::size_t>();
    p.assignments = j.at("assignments").get<std::vector<std::vector<std::size_t>>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("partition JSON: ") + e.what());
  }
}

}  // namespace flags
