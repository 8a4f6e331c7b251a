#include "flags/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "flags/error.hpp"
#include "flags/hash.hpp"
#include "flags/parallel.hpp"
#include "flags/rng.hpp"

namespace flags {
namespace {

// Message tags keep noise streams of different protocol steps apart.
enum Tag : std::uint32_t {
  kD2dShare = 1,
  kGossip,
  kCServerUp,
  kCServerDown,
  kClusterUp,
  kClusterDown,
  kInterDown,
  kEdgeUp,
  kEdgeToCloud,
  kCloudToEdge,
  kEdgeDown,
  kInterGossipBase = 1000,
};

struct Preset {
  std::string_view name;
  AlgorithmFlags flags;
};

constexpr std::array kPresets{
    Preset{"FedAvg", {DeviceAgg::cserver, false, false, false}},
    Preset{"HFL", {DeviceAgg::none, true, false, false}},
    Preset{"D2DFL", {DeviceAgg::d2d, false, false, false}},
    Preset{"GFL", {DeviceAgg::random, false, false, false}},
    Preset{"HD2DFL", {DeviceAgg::d2d, true, false, false}},
    Preset{"HGFL", {DeviceAgg::random, true, false, false}},
    Preset{"CFL", {DeviceAgg::none, false, true, false}},
    Preset{"iCFL", {DeviceAgg::none, false, true, true}},
    Preset{"CD2DFL", {DeviceAgg::d2d, false, true, false}},
    Preset{"iCD2DFL", {DeviceAgg::d2d, false, true, true}},
};

constexpr auto kPresetNames = [] {
  std::array<std::string_view, kPresets.size()> names{};
  for (std::size_t i = 0; i < kPresets.size(); ++i) names[i] = kPresets[i].name;
  return names;
}();

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

const Preset& find_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (iequals(p.name, name)) return p;
  throw InvalidArgument("unknown preset '" + std::string(name) + "'");
}

Endpoint device(NodeId k) { return {Tier::device, k}; }
Endpoint edge_server(ServerId s) { return {Tier::edge, s}; }
Endpoint cloud() { return {Tier::cloud, 0}; }

ModelParams send(const ModelParams& m, const NoiseModel& noise, Link link, const PhaseContext& ctx,
                 Endpoint from, Endpoint to, std::uint32_t tag) {
  return transmit(m, noise, link, {ctx.cfg.seed, ctx.round, from, to, tag}, ctx.sink);
}

bool decide(double prob, const PhaseContext& ctx, NodeId node, Decision kind) {
  return participates(prob, {ctx.cfg.seed, ctx.round, node, kind});
}

ModelParams pair_average(const ModelParams& own, const ModelParams& received) {
  const std::array<const ModelParams*, 2> models{&own, &received};
  return weighted_average(std::span<const ModelParams* const>(models), AggregationWeights({0.5, 0.5}));
}

ModelParams uniform_average(const ModelParams& own, const std::vector<ModelParams>& received) {
  std::vector<const ModelParams*> models{&own};
  for (const auto& m : received) models.push_back(&m);
  return weighted_average(std::span<const ModelParams* const>(models),
                          AggregationWeights::uniform(models.size()));
}

// Random perfect matching: shuffled ids taken two at a time; an odd one out
// sits the step out.
std::vector<std::pair<NodeId, NodeId>> random_pairs(std::vector<NodeId> ids, Rng rng) {
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i + 1 < ids.size(); i += 2) pairs.emplace_back(ids[i], ids[i + 1]);
  return pairs;
}

void d2d_exchange(SimulationState& state, const PhaseContext& ctx) {
  const std::size_t n = ctx.topo.node_count();
  std::vector<std::vector<ModelParams>> inbox(n);
  for (NodeId k = 0; k < n; ++k) {
    if (!decide(ctx.cfg.d, ctx, k, Decision::d2d_send)) continue;
    for (NodeId j : ctx.topo.neighbors(k))
      inbox[j].push_back(send(state.node_models[k], ctx.cfg.noise.d2d, Link::d2d, ctx, device(k),
                              device(j), kD2dShare));
  }
  std::vector<ModelParams> next(n);
  parallel_for(n, ctx.cfg.workers, [&](std::size_t j) {
    next[j] = inbox[j].empty() ? state.node_models[j] : uniform_average(state.node_models[j], inbox[j]);
  });
  state.node_models = std::move(next);
}

void gossip_exchange(SimulationState& state, const PhaseContext& ctx) {
  std::vector<NodeId> active;
  for (NodeId k = 0; k < ctx.topo.node_count(); ++k)
    if (decide(ctx.cfg.d, ctx, k, Decision::gossip)) active.push_back(k);
  const auto pairs =
      random_pairs(std::move(active), make_rng(ctx.cfg.seed, Stream::pairing,
                                               {static_cast<std::uint64_t>(ctx.round), 0}));
  for (auto [a, b] : pairs) {
    ModelParams at_a = send(state.node_models[b], ctx.cfg.noise.d2d, Link::d2d, ctx, device(b), device(a), kGossip);
    ModelParams at_b = send(state.node_models[a], ctx.cfg.noise.d2d, Link::d2d, ctx, device(a), device(b), kGossip);
    ModelParams new_a = pair_average(state.node_models[a], at_a);
    ModelParams new_b = pair_average(state.node_models[b], at_b);
    state.node_models[a] = std::move(new_a);
    state.node_models[b] = std::move(new_b);
  }
}

void central_server_round(SimulationState& state, const PhaseContext& ctx) {
  const std::size_t n = ctx.topo.node_count();
  std::vector<ModelParams> uploads;
  std::vector<double> sizes;
  for (NodeId k = 0; k < n; ++k) {
    if (!decide(ctx.cfg.p, ctx, k, Decision::cserver_send)) continue;
    const ServerId s = ctx.topo.edge_server_of(k);
    ModelParams at_edge = send(state.node_models[k], ctx.cfg.noise.d2e, Link::d2e, ctx, device(k),
                               edge_server(s), kCServerUp);
    uploads.push_back(send(at_edge, ctx.cfg.noise.e2c, Link::e2c, ctx, edge_server(s), cloud(), kCServerUp));
    sizes.push_back(ctx.data_sizes[k]);
  }
  if (uploads.empty()) return;
  state.global_model = weighted_average(uploads, AggregationWeights::proportional(sizes));
  for (NodeId k = 0; k < n; ++k) {
    const ServerId s = ctx.topo.edge_server_of(k);
    ModelParams at_edge = send(state.global_model, ctx.cfg.noise.e2c, Link::e2c, ctx, cloud(),
                               edge_server(s), kCServerDown);
    state.node_models[k] = send(at_edge, ctx.cfg.noise.d2e, Link::d2e, ctx, edge_server(s), device(k), kCServerDown);
  }
}

}  // namespace

std::string_view to_string(DeviceAgg mode) {
  switch (mode) {
    case DeviceAgg::none: return "none";
    case DeviceAgg::d2d: return "d2d";
    case DeviceAgg::random: return "random";
    case DeviceAgg::cserver: return "cserver";
  }
  return "none";
}

DeviceAgg device_agg_from_string(std::string_view text) {
  for (DeviceAgg m : {DeviceAgg::none, DeviceAgg::d2d, DeviceAgg::random, DeviceAgg::cserver})
    if (iequals(text, to_string(m))) return m;
  if (iequals(text, "false")) return DeviceAgg::none;
  throw InvalidArgument("unknown device aggregation mode '" + std::string(text) + "'");
}

void AlgorithmFlags::validate() const {
  if (inter_cluster && !cluster) throw InvalidArgument("inter-cluster aggregation requires cluster aggregation");
  if (device == DeviceAgg::cserver && (edge || cluster))
    throw InvalidArgument("central-server mode excludes edge and cluster aggregation");
}

std::span<const std::string_view> preset_names() { return kPresetNames; }

AlgorithmFlags preset_flags(std::string_view name) { return find_preset(name).flags; }

std::string canonical_preset_name(std::string_view name) { return std::string(find_preset(name).name); }

void RunConfig::validate() const {
  flags.validate();
  if (rounds < 1) throw InvalidArgument("rounds must be positive");
  if (epochs_min < 1 || epochs_max < epochs_min) throw InvalidArgument("need 1 <= epochs_min <= epochs_max");
  if (!(lr >= 0.0)) throw InvalidArgument("lr must be non-negative");
  for (double v : node_lr)
    if (!(v >= 0.0)) throw InvalidArgument("node_lr entries must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must be a probability");
  if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument("d must be a probability");
  if (global_freq < 1) throw InvalidArgument("global_freq must be at least 1");
  if (server_sample_q && *server_sample_q < 1) throw InvalidArgument("server_sample_q must be positive");
  if (ch_gossip_steps < 1) throw InvalidArgument("ch_gossip_steps must be positive");
  for (const NoiseModel* nm : {&noise.d2d, &noise.d2e, &noise.e2c})
    if (!(nm->variance >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  if (eval_every < 1) throw InvalidArgument("eval_every must be positive");
  if (workers < 1) throw InvalidArgument("workers must be positive");
  for (std::size_t h : hidden_layers)
    if (h < 1) throw InvalidArgument("hidden layer sizes must be positive");
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["flags"] = {{"device_agg", to_string(cfg.flags.device)},
                {"edge_agg", cfg.flags.edge},
                {"cluster_agg", cfg.flags.cluster},
                {"inter_cluster_agg", cfg.flags.inter_cluster}};
  j["rounds"] = cfg.rounds;
  j["epochs_min"] = cfg.epochs_min;
  j["epochs_max"] = cfg.epochs_max;
  j["lr"] = cfg.lr;
  j["node_lr"] = cfg.node_lr;
  j["batch_size"] = cfg.batch_size;
  j["p"] = cfg.p;
  j["d"] = cfg.d;
  j["global_freq"] = cfg.global_freq;
  if (cfg.server_sample_q)
    j["server_sample_q"] = *cfg.server_sample_q;
  else
    j["server_sample_q"] = "all";
  j["ch_gossip_steps"] = cfg.ch_gossip_steps;
  j["noise"] = {{"d2d", cfg.noise.d2d.variance}, {"d2e", cfg.noise.d2e.variance}, {"e2c", cfg.noise.e2c.variance}};
  j["hidden_layers"] = cfg.hidden_layers;
  j["eval_every"] = cfg.eval_every;
  j["workers"] = cfg.workers;
  j["seed"] = cfg.seed;
  return j;
}

void device_phase(SimulationState& state, const PhaseContext& ctx) {
  switch (ctx.cfg.flags.device) {
    case DeviceAgg::none: return;
    case DeviceAgg::d2d: d2d_exchange(state, ctx); return;
    case DeviceAgg::random: gossip_exchange(state, ctx); return;
    case DeviceAgg::cserver: central_server_round(state, ctx); return;
  }
}

void cluster_phase(SimulationState& state, const PhaseContext& ctx) {
  for (ClusterId c = 0; c < ctx.topo.cluster_count(); ++c) {
    const NodeId head = ctx.topo.cluster_head(c);
    std::vector<ModelParams> received;
    for (NodeId m : ctx.topo.members(c)) {
      if (m == head || !decide(ctx.cfg.d, ctx, m, Decision::cluster_send)) continue;
      received.push_back(send(state.node_models[m], ctx.cfg.noise.d2d, Link::d2d, ctx, device(m),
                              device(head), kClusterUp));
    }
    if (received.empty()) continue;
    state.node_models[head] = uniform_average(state.node_models[head], received);
    for (NodeId m : ctx.topo.members(c)) {
      if (m == head) continue;
      state.node_models[m] = send(state.node_models[head], ctx.cfg.noise.d2d, Link::d2d, ctx,
                                  device(head), device(m), kClusterDown);
    }
  }
}

void inter_cluster_phase(SimulationState& state, const PhaseContext& ctx) {
  const std::size_t clusters = ctx.topo.cluster_count();
  if (clusters < 2) return;
  const auto& heads = ctx.topo.cluster_heads();
  for (int step = 0; step < ctx.cfg.ch_gossip_steps; ++step) {
    const auto tag = kInterGossipBase + static_cast<std::uint32_t>(step);
    const auto pairs = random_pairs(
        heads, make_rng(ctx.cfg.seed, Stream::pairing,
                        {static_cast<std::uint64_t>(ctx.round), 1 + static_cast<std::uint64_t>(step)}));
    for (auto [a, b] : pairs) {
      ModelParams at_a = send(state.node_models[b], ctx.cfg.noise.d2d, Link::d2d, ctx, device(b), device(a), tag);
      ModelParams at_b = send(state.node_models[a], ctx.cfg.noise.d2d, Link::d2d, ctx, device(a), device(b), tag);
      ModelParams new_a = pair_average(state.node_models[a], at_a);
      ModelParams new_b = pair_average(state.node_models[b], at_b);
      state.node_models[a] = std::move(new_a);
      state.node_models[b] = std::move(new_b);
    }
  }
  for (ClusterId c = 0; c < clusters; ++c) {
    const NodeId head = heads[c];
    for (NodeId m : ctx.topo.members(c)) {
      if (m == head) continue;
      state.node_models[m] = send(state.node_models[head], ctx.cfg.noise.d2d, Link::d2d, ctx,
                                  device(head), device(m), kInterDown);
    }
  }
}

void edge_phase(SimulationState& state, const PhaseContext& ctx) {
  const std::size_t servers = ctx.topo.server_count();
  std::vector<bool> refreshed(servers, false);
  for (ServerId s = 0; s < servers; ++s) {
    std::vector<NodeId> candidates(ctx.topo.members(s).begin(), ctx.topo.members(s).end());
    if (ctx.cfg.server_sample_q && *ctx.cfg.server_sample_q < candidates.size()) {
      Rng rng = make_rng(ctx.cfg.seed, Stream::sampling, {static_cast<std::uint64_t>(ctx.round), s});
      std::shuffle(candidates.begin(), candidates.end(), rng);
      candidates.resize(*ctx.cfg.server_sample_q);
      std::sort(candidates.begin(), candidates.end());
    }
    std::vector<ModelParams> received;
    std::vector<double> sizes;
    for (NodeId k : candidates) {
      if (!decide(ctx.cfg.p, ctx, k, Decision::server_send)) continue;
      received.push_back(send(state.node_models[k], ctx.cfg.noise.d2e, Link::d2e, ctx, device(k),
                              edge_server(s), kEdgeUp));
      sizes.push_back(ctx.data_sizes[k]);
    }
    if (received.empty()) continue;
    state.server_models[s] = weighted_average(received, AggregationWeights::proportional(sizes));
    refreshed[s] = true;
  }

  if (ctx.round % ctx.cfg.global_freq == 0) {
    std::vector<ModelParams> uploads;
    std::vector<double> volume;
    for (ServerId s = 0; s < servers; ++s) {
      uploads.push_back(send(state.server_models[s], ctx.cfg.noise.e2c, Link::e2c, ctx, edge_server(s),
                             cloud(), kEdgeToCloud));
      double v = 0.0;
      for (NodeId k : ctx.topo.members(s)) v += ctx.data_sizes[k];
      volume.push_back(v);
    }
    state.global_model = weighted_average(uploads, AggregationWeights::proportional(volume));
    for (ServerId s = 0; s < servers; ++s) {
      state.server_models[s] = send(state.global_model, ctx.cfg.noise.e2c, Link::e2c, ctx, cloud(),
                                    edge_server(s), kCloudToEdge);
      refreshed[s] = true;
    }
  }

  for (ServerId s = 0; s < servers; ++s) {
    if (!refreshed[s]) continue;
    for (NodeId k : ctx.topo.members(s))
      state.node_models[k] = send(state.server_models[s], ctx.cfg.noise.d2e, Link::d2e, ctx,
                                  edge_server(s), device(k), kEdgeDown);
  }
}

int draw_epochs(const RunConfig& cfg, NodeId node, int round) {
  if (cfg.epochs_min == cfg.epochs_max) return cfg.epochs_min;
  Rng rng = make_rng(cfg.seed, Stream::epochs, {node, static_cast<std::uint64_t>(round)});
  return std::uniform_int_distribution<int>(cfg.epochs_min, cfg.epochs_max)(rng);
}

std::uint64_t local_update_seed(const RunConfig& cfg, NodeId node, int round) {
  return derive_seed(cfg.seed, Stream::shuffle, {node, static_cast<std::uint64_t>(round)});
}

Simulation::Simulation(RunConfig cfg, const Topology& topo, const Partition& part,
                       const LabeledDataset& train, const LabeledDataset& test)
    : cfg_(std::move(cfg)),
      topo_(topo),
      part_(part),
      train_(train),
      test_(test),
      mlp_([&] {
        Architecture arch;
        arch.layer_sizes.push_back(train.feature_dim);
        for (std::size_t h : cfg_.hidden_layers) arch.layer_sizes.push_back(h);
        arch.layer_sizes.push_back(static_cast<std::size_t>(std::max(train.num_classes, test.num_classes)));
        return arch;
      }()) {
  cfg_.validate();
  if (part_.node_count() != topo_.node_count())
    throw InvalidArgument("partition has " + std::to_string(part_.node_count()) + " nodes, topology " +
                          std::to_string(topo_.node_count()));
  if (part_.source_size != train_.size()) throw InvalidArgument("partition does not index the training set");
  if (!cfg_.node_lr.empty() && cfg_.node_lr.size() != topo_.node_count())
    throw InvalidArgument("node_lr must list one rate per node");
  if (test_.feature_dim != train_.feature_dim) throw InvalidArgument("train/test feature dimensions differ");
  part_.validate();
  data_sizes_ = part_.sizes();

  state_.global_model = mlp_.init(cfg_.seed);
  state_.node_models.assign(topo_.node_count(), state_.global_model);
  state_.server_models.assign(topo_.server_count(), state_.global_model);

  auto& meta = log_.run_meta();
  meta["config"] = to_json(cfg_);
  meta["preset"] = cfg_.preset;
  meta["seed"] = cfg_.seed;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fingerprint(topo_)));
  meta["topology_hash"] = hash;
  meta["architecture"] = mlp_.architecture().layer_sizes;
  meta["phase_order"] = {"train", "device", "cluster", "inter_cluster", "edge", "evaluate"};
}

void Simulation::train_nodes(int round) {
  parallel_for(topo_.node_count(), cfg_.workers, [&](std::size_t k) {
    TrainOptions opt;
    opt.lr = cfg_.node_lr.empty() ? cfg_.lr : cfg_.node_lr[k];
    opt.epochs = draw_epochs(cfg_, k, round);
    opt.batch_size = cfg_.batch_size;
    state_.node_models[k] = mlp_.local_update(state_.node_models[k], train_, part_.assignments[k], opt,
                                              local_update_seed(cfg_, k, round));
  });
}

void Simulation::evaluate_nodes(int round) {
  // Nodes frequently hold bit-identical models after a broadcast; each
  // distinct model is evaluated once.
  const std::size_t n = topo_.node_count();
  std::vector<std::size_t> representative(n);
  std::vector<std::size_t> unique;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
  for (std::size_t k = 0; k < n; ++k) {
    Fnv1a h;
    h.update(std::as_bytes(std::span(state_.node_models[k].values)));
    auto& bucket = by_hash[h.digest()];
    auto match = std::find_if(bucket.begin(), bucket.end(), [&](std::size_t u) {
      return state_.node_models[unique[u]].values == state_.node_models[k].values;
    });
    if (match != bucket.end()) {
      representative[k] = *match;
    } else {
      representative[k] = unique.size();
      bucket.push_back(unique.size());
      unique.push_back(k);
    }
  }
  std::vector<Evaluation> results(unique.size());
  parallel_for(unique.size(), cfg_.workers,
               [&](std::size_t u) { results[u] = mlp_.evaluate(state_.node_models[unique[u]], test_); });
  for (std::size_t k = 0; k < n; ++k) {
    const Evaluation& e = results[representative[k]];
    log_.add_row({round, k, e.accuracy, e.loss});
  }
}

void Simulation::step() {
  const int round = state_.round_index + 1;
  log_.touch_round(round);
  train_nodes(round);

  const PhaseContext ctx{cfg_, topo_, data_sizes_, log_, round};
  if (cfg_.flags.device != DeviceAgg::none) device_phase(state_, ctx);
  if (cfg_.flags.cluster) cluster_phase(state_, ctx);
  if (cfg_.flags.inter_cluster) inter_cluster_phase(state_, ctx);
  if (cfg_.flags.edge) edge_phase(state_, ctx);

  state_.round_index = round;
  if (round % cfg_.eval_every == 0 || round == cfg_.rounds) evaluate_nodes(round);
}

MetricsLog Simulation::run() {
  while (state_.round_index < cfg_.rounds) step();
  return log_;
}

MetricsLog run(const RunConfig& cfg, const Topology& topo, const Partition& part,
               const LabeledDataset& train, const LabeledDataset& test) {
  Simulation sim(cfg, topo, part, train, test);
  return sim.run();
}

}  // namespace flags
