// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "bench_corpus.hpp"
#include "cnkit/metrics.hpp"

using namespace cnkit;

static void BM_Bleu4(benchmark::State& state) {
  Rng rng(5);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ref = text::tokenize(bench::sentence(rng, n, 60));
  const auto cand = bench::edited(ref, rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::bleu_n(cand, ref, 4));
}
BENCHMARK(BM_Bleu4)->Arg(20)->Arg(60);

static void BM_RougeL(benchmark::State& state) {
  Rng rng(6);
  const auto ref = text::tokenize(bench::sentence(rng, 40, 60));
  const auto cand = bench::edited(ref, rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::rouge_l(cand, ref));
}
BENCHMARK(BM_RougeL);

static void BM_RepetitionRate(benchmark::State& state) {
  const auto corpus = bench::sentences(static_cast<std::size_t>(state.range(0)), 25, 400, 7);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::repetition_rate(corpus));
}
BENCHMARK(BM_RepetitionRate)->Arg(100)->Arg(1000);

static void BM_Novelty(benchmark::State& state) {
  const auto generated = bench::sentences(50, 25, 400, 8);
  const auto training = bench::sentences(static_cast<std::size_t>(state.range(0)), 25, 400, 9);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::novelty(generated, training));
}
BENCHMARK(BM_Novelty)->Arg(500)->Arg(3000);
