#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "flags/aggregation.hpp"
#include "flags/dataset.hpp"
#include "flags/experiment.hpp"
#include "flags/mlp.hpp"
#include "flags/topology.hpp"

namespace {

using namespace flags;

const LoadedData& mnist() {
  static const LoadedData data = [] {
    DatasetSpec spec;
    spec.kind = DatasetKind::mnist;
    spec.dir = FLAGS_MNIST_DIR;
    spec.train_limit = 6000;
    return load_data(spec);
  }();
  return data;
}

// One epoch over 150 MNIST samples, the typical shard of a 40-node run.
void BM_LocalUpdate(benchmark::State& state) {
  const auto& d = mnist().train;
  const Mlp mlp(Architecture{{784, 128, 10}});
  const ModelParams p = mlp.init(1);
  std::vector<std::size_t> idx(150);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const TrainOptions opt{0.01, 1, static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(mlp.local_update(p, d, idx, opt, 7));
  state.SetItemsProcessed(state.iterations() * 150);
}
BENCHMARK(BM_LocalUpdate)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto& test = mnist().test;
  const Mlp mlp(Architecture{{784, 128, 10}});
  const ModelParams p = mlp.init(1);
  for (auto _ : state) benchmark::DoNotOptimize(mlp.evaluate(p, test));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(test.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_WeightedAverage(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = Architecture{{784, 128, 10}}.param_count();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<ModelParams> models(k);
  for (auto& m : models) {
    m.values.resize(dim);
    for (auto& v : m.values) v = u(rng);
  }
  const auto w = AggregationWeights::uniform(k);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_average(models, w));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(k * dim * sizeof(double)));
}
BENCHMARK(BM_WeightedAverage)->Arg(2)->Arg(8)->Arg(40);

void BM_GenerateTopology(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_reachable_topology(n, 7, 0.95, 0.1, seed++));
}
BENCHMARK(BM_GenerateTopology)->Arg(40)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
