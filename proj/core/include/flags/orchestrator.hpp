#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flags/aggregation.hpp"
#include "flags/dataset.hpp"
#include "flags/metrics.hpp"
#include "flags/mlp.hpp"
#include "flags/partition.hpp"
#include "flags/topology.hpp"

namespace flags {

enum class DeviceAgg { none, d2d, random, cserver };

std::string_view to_string(DeviceAgg mode);
DeviceAgg device_agg_from_string(std::string_view text);

// The four switches that select an algorithm.
struct AlgorithmFlags {
  DeviceAgg device = DeviceAgg::none;
  bool edge = false;
  bool cluster = false;
  bool inter_cluster = false;

  // inter_cluster requires cluster; cserver excludes edge and cluster.
  void validate() const;
  friend bool operator==(const AlgorithmFlags&, const AlgorithmFlags&) = default;
};

// FedAvg, HFL, D2DFL, GFL, HD2DFL, HGFL, CFL, iCFL, CD2DFL, iCD2DFL.
std::span<const std::string_view> preset_names();
// Case-insensitive lookup; throws InvalidArgument for unknown names.
AlgorithmFlags preset_flags(std::string_view name);
std::string canonical_preset_name(std::string_view name);

struct LinkNoise {
  NoiseModel d2d;
  NoiseModel d2e;
  NoiseModel e2c;

  static LinkNoise all(double variance) { return {{variance}, {variance}, {variance}}; }
};

struct RunConfig {
  AlgorithmFlags flags;
  std::string preset;  // canonical preset name, empty for custom flags
  int rounds = 30;
  int epochs_min = 1;
  int epochs_max = 2;
  double lr = 0.01;
  std::vector<double> node_lr;  // optional per-node override of lr
  std::size_t batch_size = 32;
  double p = 0.9;  // server participation p_k
  double d = 0.9;  // neighbourhood participation d_k
  int global_freq = 1;
  std::optional<std::size_t> server_sample_q;  // empty: every attached node
  int ch_gossip_steps = 3;
  LinkNoise noise;
  std::vector<std::size_t> hidden_layers{128};
  int eval_every = 1;  // the final round is always evaluated
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

struct SimulationState {
  std::vector<ModelParams> node_models;
  std::vector<ModelParams> server_models;
  ModelParams global_model;
  int round_index = 0;
};

// Everything a phase needs besides the state it mutates.
struct PhaseContext {
  const RunConfig& cfg;
  const Topology& topo;
  std::span<const double> data_sizes;  // |D_k| per node
  MessageSink& sink;
  int round = 1;
};

// Neighbourhood averaging (d2d), random exclusive pairs (random) or a
// central server round trip (cserver), depending on cfg.flags.device.
void device_phase(SimulationState& state, const PhaseContext& ctx);
// Members send to their cluster head, which averages and broadcasts back.
void cluster_phase(SimulationState& state, const PhaseContext& ctx);
// ch_gossip_steps rounds of pairwise averaging between cluster heads, then
// every head re-broadcasts to its members.
void inter_cluster_phase(SimulationState& state, const PhaseContext& ctx);
// Edge servers aggregate attached nodes; every global_freq rounds the cloud
// aggregates the servers and the result flows back down to all nodes.
void edge_phase(SimulationState& state, const PhaseContext& ctx);

// Round engine. Each round: local training, then device -> cluster ->
// inter-cluster -> edge/global phases as enabled, then evaluation.
class Simulation {
 public:
  Simulation(RunConfig cfg, const Topology& topo, const Partition& part,
             const LabeledDataset& train, const LabeledDataset& test);

  void step();
  MetricsLog run();

  const SimulationState& state() const noexcept { return state_; }
  const MetricsLog& metrics() const noexcept { return log_; }
  const Mlp& model() const noexcept { return mlp_; }
  const RunConfig& config() const noexcept { return cfg_; }

  // Local training of every node for the upcoming round (exposed for tests).
  void train_nodes(int round);
  void evaluate_nodes(int round);

 private:
  RunConfig cfg_;
  const Topology& topo_;
  const Partition& part_;
  const LabeledDataset& train_;
  const LabeledDataset& test_;
  Mlp mlp_;
  std::vector<double> data_sizes_;
  SimulationState state_;
  MetricsLog log_;
};

MetricsLog run(const RunConfig& cfg, const Topology& topo, const Partition& part,
               const LabeledDataset& train, const LabeledDataset& test);

// Epoch count a node draws for a round, and the seed of its shuffle stream.
int draw_epochs(const RunConfig& cfg, NodeId node, int round);
std::uint64_t local_update_seed(const RunConfig& cfg, NodeId node, int round);

}  // namespace flags
