// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "hsml/trainer.hpp"

namespace {

hsml::TrainerConfig bench_config(hsml::Mode mode, std::size_t query_size) {
  hsml::TrainerConfig config;
  config.mode = mode;
  config.meta_batch = 25;
  config.query_size = query_size;
  return config;
}

void BM_MetaStep(benchmark::State& st, hsml::Mode mode, hsml::AggregatorKind kind) {
  hsml::TrainerConfig config = bench_config(mode, static_cast<std::size_t>(st.range(0)));
  config.aggregator.kind = kind;
  hsml::TrainState state = hsml::init_state(config);
  for (auto _ : st) {
    const hsml::StepMetrics m = hsml::train_iteration(config, state);
    benchmark::DoNotOptimize(m.query_loss);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(config.meta_batch));
}

void BM_Evaluate(benchmark::State& st) {
  hsml::TrainerConfig config = bench_config(hsml::Mode::Hsml, 100);
  const hsml::TrainState state = hsml::init_state(config);
  hsml::EvalOptions options;
  options.n_tasks = 10;
  for (auto _ : st) {
    const hsml::EvalReport r = hsml::evaluate(config, state.params, state.cluster, options);
    benchmark::DoNotOptimize(r.overall.mean);
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_MetaStep, maml, hsml::Mode::Maml, hsml::AggregatorKind::Recurrent)
    ->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_MetaStep, hsml_raa, hsml::Mode::Hsml, hsml::AggregatorKind::Recurrent)
    ->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_MetaStep, hsml_paa, hsml::Mode::Hsml, hsml::AggregatorKind::Pooling)
    ->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
