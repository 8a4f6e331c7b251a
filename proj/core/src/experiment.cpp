#include "flags/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "flags/error.hpp"

namespace flags {
namespace {

using nlohmann::json;

std::string type_name(const json& v) { return v.type_name(); }

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as typos.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object, got " + type_name(j_));
  }

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  void number(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number, got " + type_name(*v));
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(std::string_view key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer, got " + type_name(*v));
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0)
          out = v->get<Int>();
        else
          throw ConfigError(key_path(key), "must be non-negative");
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(std::string_view key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected a boolean, got " + type_name(*v));
      out = v->get<bool>();
    }
  }

  bool string(std::string_view key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string, got " + type_name(*v));
      out = v->get<std::string>();
      return true;
    }
    return false;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
void guarded(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

DatasetKind dataset_kind(const std::string& s, const std::string& key) {
  if (s == "mnist") return DatasetKind::mnist;
  if (s == "fashion_mnist") return DatasetKind::fashion_mnist;
  if (s == "synthetic") return DatasetKind::synthetic;
  throw ConfigError(key, "unknown dataset '" + s + "' (mnist, fashion_mnist, synthetic)");
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::fashion_mnist: return "fashion_mnist";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "synthetic";
}

PartitionKind partition_kind(const std::string& s, const std::string& key) {
  if (s == "iid") return PartitionKind::iid;
  if (s == "dirichlet") return PartitionKind::dirichlet;
  if (s == "shards") return PartitionKind::shards;
  throw ConfigError(key, "unknown partition '" + s + "' (iid, dirichlet, shards)");
}

std::string to_string(PartitionKind k) {
  switch (k) {
    case PartitionKind::iid: return "iid";
    case PartitionKind::dirichlet: return "dirichlet";
    case PartitionKind::shards: return "shards";
  }
  return "iid";
}

void parse_dataset(Section s, DatasetSpec& d) {
  std::string kind;
  if (s.string("kind", kind)) d.kind = dataset_kind(kind, s.key_path("kind"));
  std::string dir;
  if (s.string("dir", dir)) d.dir = dir;
  s.integer("train_limit", d.train_limit);
  s.integer("test_limit", d.test_limit);
  s.integer("num_classes", d.num_classes);
  s.integer("train_per_class", d.train_per_class);
  s.integer("test_per_class", d.test_per_class);
  s.integer("feature_dim", d.feature_dim);
  s.number("spread", d.spread);
  s.integer("seed", d.data_seed);
  s.finish();
}

void parse_topology(Section s, TopologySpec& t) {
  s.integer("nodes", t.nodes);
  s.integer("clusters", t.clusters);
  s.number("gamma", t.gamma);
  s.number("upsilon", t.upsilon);
  s.finish();
}

void parse_partition(Section s, PartitionSpec& p) {
  std::string kind;
  if (s.string("kind", kind)) p.kind = partition_kind(kind, s.key_path("kind"));
  s.number("alpha", p.alpha);
  s.integer("classes_per_node", p.classes_per_node);
  s.integer("shard_size", p.shard_size);
  s.finish();
}

void parse_algorithm(Section s, RunConfig& cfg) {
  std::string preset;
  const bool has_preset = s.string("preset", preset);
  if (has_preset) {
    guarded(s.key_path("preset"), [&] {
      cfg.flags = preset_flags(preset);
      cfg.preset = canonical_preset_name(preset);
    });
  }
  const bool custom = s.has("device_agg") || s.has("edge_agg") || s.has("cluster_agg") || s.has("inter_cluster_agg");
  if (has_preset && custom)
    throw ConfigError(s.key_path("preset"), "give either a preset or custom flags, not both");
  if (custom) {
    cfg.preset.clear();
    cfg.flags = {};
    std::string device;
    if (s.string("device_agg", device))
      guarded(s.key_path("device_agg"), [&] { cfg.flags.device = device_agg_from_string(device); });
    s.boolean("edge_agg", cfg.flags.edge);
    s.boolean("cluster_agg", cfg.flags.cluster);
    s.boolean("inter_cluster_agg", cfg.flags.inter_cluster);
  }
  s.finish();
  guarded(s.key_path("device_agg"), [&] { cfg.flags.validate(); });
}

void parse_noise(const json& v, const std::string& key, LinkNoise& noise) {
  if (v.is_number()) {
    noise = LinkNoise::all(v.get<double>());
    return;
  }
  Section s(v, key);
  s.number("d2d", noise.d2d.variance);
  s.number("d2e", noise.d2e.variance);
  s.number("e2c", noise.e2c.variance);
  s.finish();
}

void parse_run(Section s, RunConfig& cfg) {
  s.integer("rounds", cfg.rounds);
  s.integer("epochs_min", cfg.epochs_min);
  s.integer("epochs_max", cfg.epochs_max);
  s.number("lr", cfg.lr);
  if (const json* v = s.find("node_lr")) {
    if (!v->is_array()) throw ConfigError(s.key_path("node_lr"), "expected an array of numbers");
    cfg.node_lr.clear();
    for (const auto& x : *v) {
      if (!x.is_number()) throw ConfigError(s.key_path("node_lr"), "expected an array of numbers");
      cfg.node_lr.push_back(x.get<double>());
    }
  }
  s.integer("batch_size", cfg.batch_size);
  s.number("p", cfg.p);
  s.number("d", cfg.d);
  s.integer("global_freq", cfg.global_freq);
  if (const json* v = s.find("server_sample_q")) {
    if (v->is_string() && v->get<std::string>() == "all") {
      cfg.server_sample_q.reset();
    } else if (v->is_number_integer() && v->get<std::int64_t>() >= 1) {
      cfg.server_sample_q = v->get<std::size_t>();
    } else {
      throw ConfigError(s.key_path("server_sample_q"), "expected a positive integer or \"all\"");
    }
  }
  s.integer("ch_gossip_steps", cfg.ch_gossip_steps);
  if (const json* v = s.find("noise")) parse_noise(*v, s.key_path("noise"), cfg.noise);
  s.integer("eval_every", cfg.eval_every);
  s.integer("workers", cfg.workers);
  s.finish();
}

void parse_model(Section s, RunConfig& cfg) {
  if (const json* v = s.find("hidden_layers")) {
    if (!v->is_array()) throw ConfigError(s.key_path("hidden_layers"), "expected an array of positive integers");
    cfg.hidden_layers.clear();
    for (const auto& x : *v) {
      if (!x.is_number_integer() || x.get<std::int64_t>() < 1)
        throw ConfigError(s.key_path("hidden_layers"), "expected an array of positive integers");
      cfg.hidden_layers.push_back(x.get<std::size_t>());
    }
  }
  s.finish();
}

std::filesystem::path resolve_data_dir(const DatasetSpec& d) {
  if (!d.dir.empty()) return d.dir;
  if (const char* env = std::getenv(data_dir_env_var()); env && *env) return env;
  return {};
}

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* suffix : {".gz", ""}) {
    auto p = dir / (stem + suffix);
    if (std::filesystem::exists(p)) return p;
  }
  return {};
}

constexpr const char* kIdxStems[] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                     "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

}  // namespace

const char* data_dir_env_var() { return "FLAGS_DATA_DIR"; }

void ExperimentSpec::validate() const {
  const auto& d = dataset;
  if (d.kind == DatasetKind::synthetic) {
    require(d.num_classes >= 2, "dataset.num_classes", "must be at least 2");
    require(d.train_per_class >= 1, "dataset.train_per_class", "must be positive");
    require(d.test_per_class >= 1, "dataset.test_per_class", "must be positive");
    require(d.feature_dim >= 2, "dataset.feature_dim", "must be at least 2");
    require(d.spread >= 0.0, "dataset.spread", "must be non-negative");
  } else {
    const auto dir = resolve_data_dir(d);
    require(!dir.empty(), "dataset.dir",
            std::string("no dataset directory (set dataset.dir or ") + data_dir_env_var() + ")");
    for (const char* stem : kIdxStems)
      require(!find_idx(dir, stem).empty(), "dataset.dir", "missing " + (dir / stem).string() + "[.gz]");
  }
  const auto& t = topology;
  require(t.nodes >= 1, "topology.nodes", "must be positive");
  require(t.clusters >= 1 && t.clusters <= t.nodes, "topology.clusters", "must be in [1, nodes]");
  require(t.gamma >= 0.0 && t.gamma <= 1.0, "topology.gamma", "must be in [0, 1]");
  require(t.upsilon >= 0.0 && t.upsilon <= 1.0, "topology.upsilon", "must be in [0, 1]");
  const auto& p = partition;
  if (p.kind == PartitionKind::dirichlet)
    require(p.alpha > 0.0 && std::isfinite(p.alpha), "partition.alpha", "must be positive");
  if (p.kind == PartitionKind::shards) {
    require(p.classes_per_node >= 1, "partition.classes_per_node", "must be positive");
    require(p.shard_size >= 1, "partition.shard_size", "must be positive");
  }
  require(repeats >= 1, "repeats", "must be at least 1");
  require(!output_dir.empty(), "output_dir", "must not be empty");
  guarded("run", [&] { run.validate(); });
  if (!run.node_lr.empty())
    require(run.node_lr.size() == t.nodes, "run.node_lr", "needs one entry per node");
}

ExperimentSpec parse_config(const json& j) {
  ExperimentSpec spec;
  Section root(j, "");
  if (const json* v = root.find("dataset")) {
    if (v->is_string())
      spec.dataset.kind = dataset_kind(v->get<std::string>(), "dataset");
    else
      parse_dataset(Section(*v, "dataset"), spec.dataset);
  }
  if (const json* v = root.find("topology")) parse_topology(Section(*v, "topology"), spec.topology);
  if (const json* v = root.find("partition")) parse_partition(Section(*v, "partition"), spec.partition);
  if (const json* v = root.find("algorithm")) parse_algorithm(Section(*v, "algorithm"), spec.run);
  if (const json* v = root.find("preset")) {
    if (root.has("algorithm")) throw ConfigError("preset", "give either preset or algorithm, not both");
    parse_algorithm(Section(json{{"preset", *v}}, ""), spec.run);
  }
  if (const json* v = root.find("run")) parse_run(Section(*v, "run"), spec.run);
  if (const json* v = root.find("model")) parse_model(Section(*v, "model"), spec.run);
  root.integer("repeats", spec.repeats);
  root.integer("seed", spec.run.seed);
  std::string out;
  if (root.string("output_dir", out)) spec.output_dir = out;
  root.finish();
  if (spec.run.preset.empty() && !root.has("algorithm"))
    throw ConfigError("algorithm", "no preset or custom flags given");
  spec.validate();
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentSpec& spec) {
  const auto& d = spec.dataset;
  json dataset{{"kind", to_string(d.kind)}};
  if (d.kind == DatasetKind::synthetic) {
    dataset.update({{"num_classes", d.num_classes},
                    {"train_per_class", d.train_per_class},
                    {"test_per_class", d.test_per_class},
                    {"feature_dim", d.feature_dim},
                    {"spread", d.spread},
                    {"seed", d.data_seed}});
  } else {
    dataset["dir"] = resolve_data_dir(d).string();
  }
  dataset["train_limit"] = d.train_limit;
  dataset["test_limit"] = d.test_limit;

  json partition{{"kind", to_string(spec.partition.kind)}};
  if (spec.partition.kind == PartitionKind::dirichlet) partition["alpha"] = spec.partition.alpha;
  if (spec.partition.kind == PartitionKind::shards) {
    partition["classes_per_node"] = spec.partition.classes_per_node;
    partition["shard_size"] = spec.partition.shard_size;
  }
  return {{"dataset", dataset},
          {"topology",
           {{"nodes", spec.topology.nodes},
            {"clusters", spec.topology.clusters},
            {"gamma", spec.topology.gamma},
            {"upsilon", spec.topology.upsilon}}},
          {"partition", partition},
          {"run", to_json(spec.run)},
          {"repeats", spec.repeats},
          {"output_dir", spec.output_dir.string()}};
}

LoadedData load_data(const DatasetSpec& spec) {
  LoadedData out;
  if (spec.kind == DatasetKind::synthetic) {
    out.train = synthetic_blobs(spec.num_classes, spec.train_per_class, spec.feature_dim, spec.spread,
                                spec.data_seed, Split::train);
    out.test = synthetic_blobs(spec.num_classes, spec.test_per_class, spec.feature_dim, spec.spread,
                               spec.data_seed + 1, Split::test);
  } else {
    const auto dir = resolve_data_dir(spec);
    out.train = load_idx(find_idx(dir, kIdxStems[0]), find_idx(dir, kIdxStems[1]), Split::train);
    out.test = load_idx(find_idx(dir, kIdxStems[2]), find_idx(dir, kIdxStems[3]), Split::test);
    out.train.num_classes = out.test.num_classes = std::max(out.train.num_classes, out.test.num_classes);
  }
  if (spec.train_limit) out.train = take_first(out.train, spec.train_limit);
  if (spec.test_limit) out.test = take_first(out.test, spec.test_limit);
  return out;
}

Partition make_partition(const PartitionSpec& spec, const LabeledDataset& train, std::size_t nodes,
                         std::uint64_t seed) {
  switch (spec.kind) {
    case PartitionKind::iid: return partition_iid(train, nodes, seed);
    case PartitionKind::dirichlet: return partition_dirichlet(train, nodes, spec.alpha, seed);
    case PartitionKind::shards:
      return partition_shards(train, nodes, spec.classes_per_node, spec.shard_size, seed);
  }
  throw InvalidArgument("unknown partition kind");
}

MetricsLog run_single(const ExperimentSpec& spec, const LoadedData& data, std::uint64_t seed) {
  const auto& t = spec.topology;
  const Topology topo = generate_reachable_topology(t.nodes, t.clusters, t.gamma, t.upsilon, seed);
  const Partition part = make_partition(spec.partition, data.train, t.nodes, seed);
  RunConfig cfg = spec.run;
  cfg.seed = seed;
  MetricsLog log = run(cfg, topo, part, data.train, data.test);
  json experiment = to_json(spec);
  experiment["run"]["seed"] = seed;
  log.run_meta()["experiment"] = std::move(experiment);
  log.run_meta()["mean_label_tv_distance"] = mean_label_tv_distance(data.train, part);
  return log;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<MetricsLog>& runs) {
  if (runs.empty()) throw InvalidArgument("no runs to aggregate");
  std::vector<std::vector<SummaryRow>> summaries;
  for (const auto& r : runs) summaries.push_back(summarize(r));
  const auto& first = summaries.front();
  for (const auto& s : summaries) {
    if (s.size() != first.size()) throw InvalidArgument("runs evaluated different rounds");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i].round != first[i].round) throw InvalidArgument("runs evaluated different rounds");
  }
  const double n = static_cast<double>(runs.size());
  std::vector<AggregateRow> out;
  for (std::size_t i = 0; i < first.size(); ++i) {
    AggregateRow row;
    row.round = first[i].round;
    for (const auto& s : summaries) {
      row.mean_accuracy += s[i].mean_accuracy;
      row.mean_loss += s[i].mean_loss;
      row.d2d += static_cast<double>(s[i].cumulative.d2d);
      row.d2e += static_cast<double>(s[i].cumulative.d2e);
      row.e2c += static_cast<double>(s[i].cumulative.e2c);
    }
    row.mean_accuracy /= n;
    row.mean_loss /= n;
    row.d2d /= n;
    row.d2e /= n;
    row.e2c /= n;
    double var = 0.0;
    for (const auto& s : summaries) var += (s[i].mean_accuracy - row.mean_accuracy) * (s[i].mean_accuracy - row.mean_accuracy);
    row.std_accuracy = std::sqrt(var / n);
    out.push_back(row);
  }
  return out;
}

void write_summary_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + file.string());
  out << "round,mean_accuracy,std_accuracy,mean_loss,d2d,d2e,e2c\n";
  for (const auto& r : rows)
    out << r.round << ',' << format_double(r.mean_accuracy) << ',' << format_double(r.std_accuracy) << ','
        << format_double(r.mean_loss) << ',' << format_double(r.d2d) << ',' << format_double(r.d2e) << ','
        << format_double(r.e2c) << '\n';
  if (!out) throw FormatError(FormatError::Kind::io, "failed writing " + file.string());
}

std::vector<MetricsLog> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(spec.output_dir);
  const fs::path marker = spec.output_dir / "INCOMPLETE";
  std::ofstream(marker) << "run in progress or failed\n";

  std::vector<MetricsLog> logs;
  try {
    const LoadedData data = load_data(spec.dataset);
    {
      std::ofstream cfg(spec.output_dir / "config.json", std::ios::binary);
      cfg << to_json(spec).dump(2) << '\n';
    }
    for (int i = 0; i < spec.repeats; ++i) {
      const std::uint64_t seed = spec.run.seed + static_cast<std::uint64_t>(i);
      logs.push_back(run_single(spec, data, seed));
      char name[32];
      std::snprintf(name, sizeof name, "run_%03d", i);
      export_metrics(logs.back(), spec.output_dir / name);
    }
    write_summary_csv(aggregate_runs(logs), spec.output_dir / "summary.csv");
  } catch (...) {
    std::ofstream(marker, std::ios::app) << "failed\n";
    throw;
  }
  fs::remove(marker);
  return logs;
}

}  // namespace flags
