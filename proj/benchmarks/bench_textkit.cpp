// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "bench_corpus.hpp"

using namespace cnkit;

static void BM_Tokenize(benchmark::State& state) {
  Rng rng(1);
  std::string text = bench::sentence(rng, static_cast<std::size_t>(state.range(0)), 500);
  text += ", isn't it? \xC3\x89migr\xC3\xA9s (too).";
  for (auto _ : state) benchmark::DoNotOptimize(text::tokenize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(16)->Arg(64)->Arg(256);

static void BM_TerPostEdit(benchmark::State& state) {
  Rng rng(2);
  const auto ref = text::tokenize(bench::sentence(rng, static_cast<std::size_t>(state.range(0)), 200));
  const auto hyp = bench::edited(ref, rng);
  for (auto _ : state) benchmark::DoNotOptimize(text::ter(hyp, ref));
}
BENCHMARK(BM_TerPostEdit)->Arg(10)->Arg(25)->Arg(50);

static void BM_TerUnrelated(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ref = text::tokenize(bench::sentence(rng, n, 30));
  const auto hyp = text::tokenize(bench::sentence(rng, n, 30));
  for (auto _ : state) benchmark::DoNotOptimize(text::ter(hyp, ref));
}
BENCHMARK(BM_TerUnrelated)->Arg(10)->Arg(25);

static void BM_Lcs(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = text::tokenize(bench::sentence(rng, n, 50));
  const auto b = text::tokenize(bench::sentence(rng, n, 50));
  for (auto _ : state) benchmark::DoNotOptimize(text::lcs_length(a, b));
}
BENCHMARK(BM_Lcs)->Arg(32)->Arg(128);
