#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flags/dataset.hpp"
#include "flags/metrics.hpp"
#include "flags/orchestrator.hpp"
#include "flags/partition.hpp"
#include "flags/topology.hpp"

namespace flags {

enum class DatasetKind { mnist, fashion_mnist, synthetic };
enum class PartitionKind { iid, dirichlet, shards };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  // IDX directory for mnist/fashion_mnist; falls back to $FLAGS_DATA_DIR.
  std::filesystem::path dir;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
  // synthetic blobs
  int num_classes = 10;
  int train_per_class = 100;
  int test_per_class = 50;
  int feature_dim = 16;
  double spread = 0.15;
  std::uint64_t data_seed = 7;
};

struct TopologySpec {
  std::size_t nodes = 40;
  std::size_t clusters = 7;
  double gamma = 0.95;
  double upsilon = 0.1;
};

struct PartitionSpec {
  PartitionKind kind = PartitionKind::dirichlet;
  double alpha = 0.1;
  int classes_per_node = 2;
  std::size_t shard_size = 50;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  TopologySpec topology;
  PartitionSpec partition;
  RunConfig run;  // run.seed is the base seed; repeat i uses base + i
  int repeats = 1;
  std::filesystem::path output_dir = "runs";

  void validate() const;
};

// Strict: unknown keys, wrong types and out-of-range values raise
// ConfigError naming the dotted key path.
ExperimentSpec parse_config(const nlohmann::json& j);
ExperimentSpec parse_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentSpec& spec);

const char* data_dir_env_var();

struct LoadedData {
  LabeledDataset train;
  LabeledDataset test;
};
LoadedData load_data(const DatasetSpec& spec);

Partition make_partition(const PartitionSpec& spec, const LabeledDataset& train, std::size_t nodes,
                         std::uint64_t seed);

// One repeat: topology, partition and simulation all derived from `seed`.
MetricsLog run_single(const ExperimentSpec& spec, const LoadedData& data, std::uint64_t seed);

struct AggregateRow {
  int round = 0;
  double mean_accuracy = 0.0;  // mean over repeats of the per-run node mean
  double std_accuracy = 0.0;   // population std over repeats
  double mean_loss = 0.0;
  double d2d = 0.0;  // cumulative messages, averaged over repeats
  double d2e = 0.0;
  double e2c = 0.0;
};

std::vector<AggregateRow> aggregate_runs(const std::vector<MetricsLog>& runs);
void write_summary_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& file);

// Runs every repeat into output_dir/run_000, run_001, ... and writes
// output_dir/summary.csv. On failure an INCOMPLETE file is left in
// output_dir and the error is rethrown.
std::vector<MetricsLog> run_experiment(const ExperimentSpec& spec);

}  // namespace flags
