#include <map>

#include <benchmark/benchmark.h>

#include "crcvote/ensemble.hpp"
#include "crcvote/eval.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/random.hpp"

using namespace crcvote;

namespace {

const LabeledDataset& dataset(std::int64_t n) {
  static std::map<std::int64_t, LabeledDataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, generate_synthetic(n, 42, GeneratorParams{})).first;
  }
  return it->second;
}

void BM_Generate(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_synthetic(state.range(0), 7, GeneratorParams{}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(1000)->Arg(10000);

void BM_Auc(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<int> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(auc(s, y));
  }
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

void BM_Train(benchmark::State& state) {
  auto kind = default_roster()[static_cast<std::size_t>(state.range(0))];
  state.SetLabel(std::string(to_string(kind)));
  const auto& ds = dataset(3600);
  Hyperparams hp;
  hp.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(kind, ds, hp));
  }
}
BENCHMARK(BM_Train)->DenseRange(0, 5)->Unit(benchmark::kMillisecond);

void BM_EnsemblePredict(benchmark::State& state) {
  Hyperparams hp;
  hp.seed = 1;
  hp.forest.trees = 100;
  static const auto e = train_ensemble(default_roster(), dataset(1000), hp);
  FeatureVector x{40.0, 28.0, 66.0, 1, 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(e.predict(x));
  }
}
BENCHMARK(BM_EnsemblePredict);

}  // namespace

BENCHMARK_MAIN();
