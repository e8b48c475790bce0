#include <benchmark/benchmark.h>

#include "tosca/batch.hpp"

using namespace tosca;

namespace {

struct Fixture {
  FeatureDataset test;
  ModuleBank bank{32, 48};

  Fixture() {
    SynthParams p;
    p.num_classes = 50;
    p.n_train = 20;
    p.n_test = 40;
    auto [train, t] = synth_gaussian(p);
    test = std::move(t);
    EngineConfig cfg;
    cfg.optim.epochs = 1;
    const auto plan = make_splits(train.classes(), 0, 5);
    for (std::size_t b = 0; b < plan.num_stages(); ++b) {
      const auto& ids = plan.stages[b];
      bank = train_session(bank, train.subset({ids.begin(), ids.end()}).samples, ids, cfg, b);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_predict_parallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(f.bank, f.test.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.test.size()));
}

void BM_predict_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch_serial(f.bank, f.test.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.test.size()));
}

void BM_classify_parallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto& e = f.bank[0];
  for (auto _ : state) benchmark::DoNotOptimize(classify_batch(e.module, e.head, f.test.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.test.size()));
}

void BM_classify_serial(benchmark::State& state) {
  const auto& f = fixture();
  const auto& e = f.bank[0];
  for (auto _ : state) benchmark::DoNotOptimize(classify_batch_serial(e.module, e.head, f.test.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.test.size()));
}

}  // namespace

BENCHMARK(BM_predict_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_predict_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_classify_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_classify_serial)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
