// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is the number of failed criteria (capped at 255).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "flags/dataset.hpp"
#include "flags/experiment.hpp"
#include "flags/mlp.hpp"
#include "flags/orchestrator.hpp"
#include "flags/partition.hpp"
#include "flags/rng.hpp"
#include "flags/topology.hpp"

namespace {

using namespace flags;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.emplace_back(buf);
  }
  // Records the check and returns it.
  bool require(bool ok, const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.emplace_back(std::string(ok ? "ok   " : "MISS ") + buf);
    pass = pass && ok;
    return ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

// --- oracle equivalence ---

Outcome oracle_equivalence() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const LabeledDataset train = synthetic_blobs(10, 60, 16, 0.15, 7);
  const LabeledDataset test = synthetic_blobs(10, 20, 16, 0.15, 8, Split::test);
  const Topology topo = testing::make_topology({0}, {}, {0});
  const Partition part = partition_iid(train, 1, 0);
  RunConfig cfg;
  cfg.flags = preset_flags("FedAvg");
  cfg.preset = "FedAvg";
  cfg.p = cfg.d = 1.0;
  cfg.rounds = 30;
  cfg.epochs_min = 1;
  cfg.epochs_max = 2;
  cfg.lr = 0.05;
  cfg.batch_size = 8;
  cfg.hidden_layers = {32};
  cfg.seed = 2024;

  Simulation sim(cfg, topo, part, train, test);
  const Mlp& mlp = sim.model();
  ModelParams ref = mlp.init(cfg.seed);
  int identical = 0;
  for (int r = 1; r <= cfg.rounds; ++r) {
    sim.step();
    Rng rng = make_rng(local_update_seed(cfg, 0, r), Stream::shuffle);
    std::vector<std::size_t> order = part.assignments[0];
    for (int e = 0; e < draw_epochs(cfg, 0, r); ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        const auto g = mlp.loss_and_grad(ref, {train, {order.data() + start, stop - start}}).grad;
        for (std::size_t i = 0; i < ref.size(); ++i) ref.values[i] -= cfg.lr * g[i];
      }
    }
    identical += sim.state().node_models[0] == ref && sim.state().global_model == ref;
  }
  const double elapsed = seconds_since(t0);
  out.require(identical == cfg.rounds, "bitwise identical rounds: %d / %d", identical, cfg.rounds);
  out.require(elapsed < 5.0, "wall time %.2f s < 5 s", elapsed);
  return out;
}

// --- gradient suite ---

double max_relative_fd_error(const Mlp& mlp, const ModelParams& p, const Minibatch& b) {
  const auto analytic = mlp.loss_and_grad(p, b).grad;
  const double eps = 1e-5;
  double worst = 0.0;
  ModelParams probe = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + eps;
    const double up = mlp.loss_and_grad(probe, b).loss;
    probe.values[i] = orig - eps;
    const double down = mlp.loss_and_grad(probe, b).loss;
    probe.values[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

Outcome gradient_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t net = 0; net < 20; ++net) {
    std::mt19937_64 rng(1000 + net);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    std::vector<std::size_t> sizes{pick(2, 12)};
    const std::size_t hidden = pick(1, 3);
    for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(pick(2, 10));
    const int classes = static_cast<int>(pick(2, 6));
    sizes.push_back(static_cast<std::size_t>(classes));

    LabeledDataset d;
    d.feature_dim = sizes.front();
    d.num_classes = classes;
    const std::size_t samples = pick(1, 8);
    d.features = testing::random_vector(samples * d.feature_dim, 2000 + net, 0.0, 1.0);
    for (std::size_t i = 0; i < samples; ++i) d.labels.push_back(static_cast<int>(pick(0, static_cast<std::size_t>(classes) - 1)));
    std::vector<std::size_t> idx(samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    const Mlp mlp(Architecture{sizes});
    const ModelParams p = mlp.init(3000 + net);
    params += p.size();
    worst = std::max(worst, max_relative_fd_error(mlp, p, {d, idx}));
  }
  const double elapsed = seconds_since(t0);
  out.note("20 nets, %zu parameters checked", params);
  out.require(worst < 1e-4, "max relative error %.3g < 1e-4", worst);
  out.require(elapsed < 10.0, "wall time %.2f s < 10 s", elapsed);
  return out;
}

// --- aggregation identities ---

void run_phases(SimulationState& state, const PhaseContext& ctx) {
  if (ctx.cfg.flags.device != DeviceAgg::none) device_phase(state, ctx);
  if (ctx.cfg.flags.cluster) cluster_phase(state, ctx);
  if (ctx.cfg.flags.inter_cluster) inter_cluster_phase(state, ctx);
  if (ctx.cfg.flags.edge) edge_phase(state, ctx);
}

SimulationState uniform_state(const Topology& t, const ModelParams& m) {
  SimulationState s;
  s.node_models.assign(t.node_count(), m);
  s.server_models.assign(t.server_count(), m);
  s.global_model = m;
  return s;
}

// Every node linked to the k nearest on each side: 2k-regular.
Topology circulant(std::size_t n, std::size_t k) {
  std::set<Edge> edges;
  for (NodeId a = 0; a < n; ++a)
    for (std::size_t j = 1; j <= k; ++j) {
      const NodeId b = (a + j) % n;
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  return testing::make_topology(std::vector<ClusterId>(n, 0), {edges.begin(), edges.end()}, {0});
}

Topology petersen() {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < 5; ++i) {
    edges.emplace_back(i, (i + 1) % 5);
    edges.emplace_back(i, i + 5);
    edges.emplace_back(5 + i, 5 + (i + 2) % 5);
  }
  for (auto& [a, b] : edges)
    if (a > b) std::swap(a, b);
  return testing::make_topology(std::vector<ClusterId>(10, 0), edges, {0});
}

Outcome aggregation_identities() {
  Outcome out;
  const ModelParams m = testing::vec(testing::random_vector(50, 77, -2.0, 2.0));

  double fixed_worst = 0.0;
  int fixed_cases = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Topology t = generate_reachable_topology(40, 7, 0.95, 0.1, seed);
    const std::vector<double> sizes = testing::random_vector(40, seed + 10, 5, 300);
    for (auto name : preset_names()) {
      for (double prob : {1.0, 0.6}) {
        RunConfig cfg;
        cfg.flags = preset_flags(name);
        cfg.p = cfg.d = prob;
        cfg.seed = seed;
        if (prob < 1.0) cfg.server_sample_q = 4;
        SimulationState state = uniform_state(t, m);
        testing::CountingSink sink;
        for (int round = 1; round <= 3; ++round) run_phases(state, {cfg, t, sizes, sink, round});
        auto check = [&](const ModelParams& x) {
          for (std::size_t i = 0; i < x.size(); ++i) fixed_worst = std::max(fixed_worst, std::abs(x.values[i] - m.values[i]));
        };
        for (const auto& x : state.node_models) check(x);
        for (const auto& x : state.server_models) check(x);
        check(state.global_model);
        ++fixed_cases;
      }
    }
  }
  out.require(fixed_worst <= 1e-12, "convex fixed point, %d preset/topology/participation cases: max deviation %.3g <= 1e-12",
              fixed_cases, fixed_worst);

  double mean_worst = 0.0;
  int mean_cases = 0;
  const std::vector<Topology> regular{testing::ring(11), testing::complete_graph(8), circulant(12, 2), petersen()};
  for (const Topology& t : regular) {
    const std::size_t n = t.node_count();
    const std::vector<double> sizes(n, 1.0);
    SimulationState init;
    for (NodeId k = 0; k < n; ++k) init.node_models.push_back(testing::vec(testing::random_vector(20, 500 + k, -3, 3)));
    init.server_models.assign(t.server_count(), init.node_models[0]);
    init.global_model = init.node_models[0];
    auto mean_of = [&](const SimulationState& s) {
      std::vector<double> mean(20, 0.0);
      for (const auto& x : s.node_models)
        for (std::size_t i = 0; i < 20; ++i) mean[i] += x.values[i] / static_cast<double>(n);
      return mean;
    };
    const auto before = mean_of(init);
    for (auto name : preset_names()) {
      RunConfig cfg;
      cfg.flags = preset_flags(name);
      if (cfg.flags.device != DeviceAgg::d2d && cfg.flags.device != DeviceAgg::random) continue;
      cfg.p = cfg.d = 1.0;
      cfg.seed = 9;
      SimulationState s = init;
      testing::CountingSink sink;
      device_phase(s, {cfg, t, sizes, sink, 1});
      const auto after = mean_of(s);
      for (std::size_t i = 0; i < 20; ++i) mean_worst = std::max(mean_worst, std::abs(after[i] - before[i]));
      ++mean_cases;
    }
  }
  out.require(mean_worst <= 1e-12, "mean preservation, %d device-phase cases on 4 regular graphs: max drift %.3g <= 1e-12",
              mean_cases, mean_worst);
  return out;
}

// --- message counts ---

// 12 nodes, clusters {0..3}, {4..7}, {8..11}; heads 0, 4, 8; 16 links.
Topology fixed_topology() {
  std::vector<Edge> edges{{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {4, 5}, {4, 6}, {5, 7},
                          {6, 7}, {8, 9}, {8, 10}, {9, 11}, {10, 11}, {3, 4}, {7, 8}, {0, 11}};
  return testing::make_topology({0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2}, edges, {0, 4, 8});
}

Outcome message_counts() {
  Outcome out;
  const std::map<std::string_view, CommCounts> table{
      {"FedAvg", {0, 24, 24}}, {"HFL", {0, 24, 6}},   {"D2DFL", {32, 0, 0}},  {"GFL", {12, 0, 0}},
      {"HD2DFL", {32, 24, 6}}, {"HGFL", {12, 24, 6}}, {"CFL", {18, 0, 0}},    {"iCFL", {33, 0, 0}},
      {"CD2DFL", {50, 0, 0}},  {"iCD2DFL", {65, 0, 0}},
  };
  const Topology t = fixed_topology();
  const LabeledDataset train = synthetic_blobs(3, 12, 4, 0.2, 1);
  const LabeledDataset test = synthetic_blobs(3, 4, 4, 0.2, 2, Split::test);
  const Partition part = partition_iid(train, 12, 0);
  for (auto name : preset_names()) {
    RunConfig cfg;
    cfg.flags = preset_flags(name);
    cfg.preset = std::string(name);
    cfg.p = cfg.d = 1.0;
    cfg.rounds = 3;
    cfg.hidden_layers = {4};
    cfg.ch_gossip_steps = 3;
    const MetricsLog log = run(cfg, t, part, train, test);
    const CommCounts want = table.at(name);
    bool ok = true;
    for (int r = 1; r <= cfg.rounds; ++r) ok = ok && log.comm_for_round(r) == want;
    const CommCounts got = log.comm_for_round(1);
    out.require(ok, "%-8s (d2d, d2e, e2c) = (%llu, %llu, %llu), expected (%llu, %llu, %llu) in rounds 1-3",
                std::string(name).c_str(), static_cast<unsigned long long>(got.d2d),
                static_cast<unsigned long long>(got.d2e), static_cast<unsigned long long>(got.e2c),
                static_cast<unsigned long long>(want.d2d), static_cast<unsigned long long>(want.d2e),
                static_cast<unsigned long long>(want.e2c));
  }
  return out;
}

// --- desk-scale MNIST runs ---

struct Setting {
  std::string preset;
  PartitionKind partition = PartitionKind::dirichlet;
  double alpha = 0.1;
  double participation = 0.9;
  double noise = 0.0;
  int rounds = 30;
  int epochs_min = 1;
  int epochs_max = 2;

  std::string label() const {
    char buf[160];
    const std::string part = partition == PartitionKind::shards ? std::string("shards(2x50)")
                                                                : "alpha=" + std::to_string(alpha).substr(0, 3);
    std::snprintf(buf, sizeof buf, "%-8s %-12s p=d=%.1f noise=%.2g rounds=%d epochs=[%d,%d]", preset.c_str(),
                  part.c_str(), participation, noise, rounds, epochs_min, epochs_max);
    return buf;
  }
};

class DeskBench {
 public:
  explicit DeskBench(std::vector<std::uint64_t> seeds) : seeds_(std::move(seeds)) {
    DatasetSpec ds;
    ds.kind = DatasetKind::mnist;
    ds.dir = FLAGS_MNIST_DIR;
    ds.train_limit = 6000;
    data_ = load_data(ds);
    spec_.dataset = ds;
    spec_.topology = {40, 7, 0.95, 0.1};
    spec_.run.lr = 0.01;
    spec_.run.batch_size = 1;
    spec_.run.hidden_layers = {128};
    spec_.run.workers = 1;
  }

  std::size_t train_size() const { return data_.train.size(); }
  std::size_t test_size() const { return data_.test.size(); }
  const LabeledDataset& train() const { return data_.train; }
  double cpu_spent() const { return cpu_spent_; }
  int runs() const { return runs_; }

  // Mean over seeds of the final-round mean node accuracy.
  double accuracy(const Setting& s, Outcome& out) {
    const std::string key = s.label();
    if (auto it = cache_.find(key); it != cache_.end()) {
      out.note("%s -> %.4f (cached)", key.c_str(), it->second);
      return it->second;
    }
    ExperimentSpec spec = spec_;
    spec.partition.kind = s.partition;
    spec.partition.alpha = s.alpha;
    spec.partition.classes_per_node = 2;
    spec.partition.shard_size = 50;
    spec.run.flags = preset_flags(s.preset);
    spec.run.preset = canonical_preset_name(s.preset);
    spec.run.p = spec.run.d = s.participation;
    spec.run.noise = LinkNoise::all(s.noise);
    spec.run.rounds = s.rounds;
    spec.run.eval_every = s.rounds;
    spec.run.epochs_min = s.epochs_min;
    spec.run.epochs_max = s.epochs_max;

    const double cpu0 = cpu_seconds();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> per_seed;
    for (std::uint64_t seed : seeds_) per_seed.push_back(summarize(run_single(spec, data_, seed)).back().mean_accuracy);
    const double cpu = cpu_seconds() - cpu0;
    cpu_spent_ += cpu;
    runs_ += static_cast<int>(seeds_.size());
    const double mean = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / static_cast<double>(per_seed.size());
    std::string seeds_text;
    for (double a : per_seed) seeds_text += (seeds_text.empty() ? "" : " ") + std::to_string(a).substr(0, 6);
    out.note("%s -> %.4f [%s] %.1f s", key.c_str(), mean, seeds_text.c_str(), seconds_since(t0));
    std::fflush(stdout);
    return cache_[key] = mean;
  }

 private:
  std::vector<std::uint64_t> seeds_;
  LoadedData data_;
  ExperimentSpec spec_;
  std::map<std::string, double> cache_;
  double cpu_spent_ = 0.0;
  int runs_ = 0;
};

std::vector<std::string> all_presets() {
  std::vector<std::string> v;
  for (auto n : preset_names()) v.emplace_back(n);
  return v;
}

Outcome desk_ordering(DeskBench& bench) {
  Outcome out;
  out.note("MNIST train %zu, test %zu, [784,128,10], 40 nodes / 7 clusters", bench.train_size(), bench.test_size());
  std::map<std::string, double> iid_ish, skewed;
  for (const auto& name : all_presets()) iid_ish[name] = bench.accuracy({name, PartitionKind::dirichlet, 1.0, 0.9}, out);
  for (const auto& name : all_presets()) skewed[name] = bench.accuracy({name, PartitionKind::dirichlet, 0.1, 0.9}, out);
  const double hfl = bench.accuracy({"HFL", PartitionKind::dirichlet, 0.1, 0.6}, out);
  const double gfl = bench.accuracy({"GFL", PartitionKind::dirichlet, 0.1, 0.6}, out);
  const double icd = bench.accuracy({"iCD2DFL", PartitionKind::dirichlet, 0.1, 0.6}, out);

  for (const auto& [name, acc] : iid_ish) out.require(acc >= 0.85, "(a) %-8s alpha=1.0: %.4f >= 0.85", name.c_str(), acc);
  out.require(hfl - gfl >= 0.10, "(b) HFL - GFL at alpha=0.1, p=d=0.6: %.4f - %.4f = %.4f >= 0.10", hfl, gfl, hfl - gfl);
  out.require(std::abs(icd - hfl) <= 0.05, "(b) |iCD2DFL - HFL| at alpha=0.1, p=d=0.6: |%.4f - %.4f| = %.4f <= 0.05", icd,
              hfl, std::abs(icd - hfl));
  for (const auto& [name, acc] : skewed)
    out.require(acc < iid_ish[name], "(c) %-8s alpha=0.1 %.4f < alpha=1.0 %.4f", name.c_str(), acc, iid_ish[name]);
  // Checked last, so the budget covers every MNIST run of the suite.
  out.require(bench.cpu_spent() <= 1800.0, "%d MNIST runs used %.1f CPU s <= 1800 s", bench.runs(), bench.cpu_spent());
  return out;
}

Outcome skewed_shards(DeskBench& bench) {
  Outcome out;
  auto acc = [&](const char* name) { return bench.accuracy({name, PartitionKind::shards, 0.0, 0.6}, out); };
  const double hfl = acc("HFL");
  for (const char* name : {"D2DFL", "GFL", "CD2DFL"}) {
    const double a = acc(name);
    out.require(hfl - a >= 0.05, "HFL - %-7s = %.4f - %.4f = %.4f >= 0.05", name, hfl, a, hfl - a);
  }
  for (const char* name : {"iCFL", "iCD2DFL"}) {
    const double a = acc(name);
    out.require(std::abs(hfl - a) <= 0.08, "|HFL - %-7s| = |%.4f - %.4f| = %.4f <= 0.08", name, hfl, a, std::abs(hfl - a));
  }
  return out;
}

Outcome noise_robustness(DeskBench& bench) {
  Outcome out;
  const double clean = bench.accuracy({"HFL", PartitionKind::dirichlet, 0.1, 0.9, 0.0}, out);
  const double noisy = bench.accuracy({"HFL", PartitionKind::dirichlet, 0.1, 0.9, 0.01}, out);
  out.require(clean - noisy <= 0.05, "HFL drop with noise variance 0.01 on every link: %.4f - %.4f = %.4f <= 0.05", clean,
              noisy, clean - noisy);
  return out;
}

Outcome few_shot(DeskBench& bench) {
  Outcome out;
  auto acc = [&](const char* name) { return bench.accuracy({name, PartitionKind::dirichlet, 0.1, 0.9, 0.0, 20, 15, 20}, out); };
  std::map<std::string, double> low, high;
  for (const char* name : {"HFL", "HGFL"}) high[name] = acc(name);
  for (const char* name : {"D2DFL", "GFL", "CD2DFL"}) low[name] = acc(name);
  for (const auto& [l, la] : low)
    for (const auto& [h, ha] : high) out.require(la < ha, "%-6s %.4f < %-4s %.4f", l.c_str(), la, h.c_str(), ha);
  return out;
}

// --- partition suite ---

Outcome partition_suite(const LabeledDataset& train) {
  Outcome out;
  const std::size_t n = 40;
  int disjoint = 0, covering = 0, cases = 0, shard_cases = 0, two_label = 0;
  auto check = [&](const Partition& p, bool must_cover) {
    std::vector<int> used(p.source_size, 0);
    bool ok = p.node_count() == n && p.source_size == train.size();
    for (const auto& a : p.assignments) {
      ok = ok && !a.empty();
      for (std::size_t i : a) {
        if (i >= used.size()) return false;
        ++used[i];
      }
    }
    const bool dis = ok && std::all_of(used.begin(), used.end(), [](int u) { return u <= 1; });
    const bool cover = std::all_of(used.begin(), used.end(), [](int u) { return u == 1; });
    disjoint += dis;
    covering += must_cover && cover;
    return dis && (!must_cover || cover);
  };

  const std::vector<double> alphas{0.1, 1.0, 10.0, 100.0};
  std::vector<double> tv(alphas.size(), 0.0);
  int monotone_seeds = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    check(partition_iid(train, n, seed), true);
    ++cases;
    std::vector<double> per(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const Partition p = partition_dirichlet(train, n, alphas[a], seed);
      check(p, true);
      ++cases;
      per[a] = mean_label_tv_distance(train, p);
      tv[a] += per[a] / 50.0;
    }
    monotone_seeds += std::is_sorted(per.rbegin(), per.rend()) && std::adjacent_find(per.begin(), per.end()) == per.end();
    const Partition shards = partition_shards(train, n, 2, 50, seed);
    check(shards, false);
    ++shard_cases;
    bool two = true;
    for (const auto& a : shards.assignments) {
      const auto h = class_histogram(train, a);
      two = two && std::count_if(h.begin(), h.end(), [](std::size_t c) { return c > 0; }) == 2;
    }
    two_label += two;
  }
  out.require(disjoint == cases + shard_cases, "disjoint, in range, no empty node: %d / %d partitions", disjoint,
              cases + shard_cases);
  out.require(covering == cases, "iid and Dirichlet cover every sample exactly once: %d / %d", covering, cases);
  out.require(two_label == shard_cases, "shards give every node exactly 2 labels: %d / %d", two_label, shard_cases);
  out.require(tv[0] > tv[1] && tv[1] > tv[2] && tv[2] > tv[3],
              "mean TV over 50 seeds strictly decreasing in alpha: %.4f > %.4f > %.4f > %.4f", tv[0], tv[1], tv[2], tv[3]);
  out.note("per-seed strict monotonicity: %d / 50 seeds", monotone_seeds);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<std::string> only;
  app.add_option("--only", only, "Run only these criteria (by key)");
  bool list = false;
  app.add_flag("--list", list, "List criterion keys");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<DeskBench> bench;
  auto desk = [&]() -> DeskBench& {
    if (!bench) bench = std::make_unique<DeskBench>(std::vector<std::uint64_t>{0, 1, 2});
    return *bench;
  };

  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {"oracle", {"FedAvg with one node equals plain SGD bitwise", oracle_equivalence}},
      {"gradient", {"backprop matches central finite differences", gradient_suite}},
      {"aggregation", {"convex fixed point and mean preservation", aggregation_identities}},
      {"messages", {"per-round message counts match the closed forms", message_counts}},
      {"partition", {"partition disjointness, coverage and TV monotonicity", [&] { return partition_suite(desk().train()); }}},
      {"shards", {"2-class shard degradation", [&] { return skewed_shards(desk()); }}},
      {"noise", {"noise robustness of HFL", [&] { return noise_robustness(desk()); }}},
      {"fewshot", {"few-shot regression of decentralised presets", [&] { return few_shot(desk()); }}},
      {"desk", {"desk-scale MNIST ordering within the CPU budget", [&] { return desk_ordering(desk()); }}},
  };
  if (list) {
    for (const auto& [key, c] : criteria) std::printf("%-12s %s\n", key.c_str(), c.first.c_str());
    return 0;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0, ran = 0;
  for (const auto& [key, c] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), key) == only.end()) continue;
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o.require(false, "error: %s", e.what());
    }
    ++ran;
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", key.c_str(), c.first.c_str());
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
  }
  std::printf("%d / %d criteria passed in %.1f s\n", ran - failed, ran, seconds_since(t0));
  return std::min(failed, 255);
}
