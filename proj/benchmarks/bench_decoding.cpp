// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "bench_corpus.hpp"
#include "cnkit/decoding.hpp"

using namespace cnkit;

namespace {

const lm::NgramLm& model() {
  static const lm::NgramLm m = lm::train_ngram(bench::sentences(2000, 20, 800, 10), 3);
  return m;
}

lm::Distribution peaked(std::size_t size) {
  Rng rng(11);
  std::vector<double> w(size);
  for (auto& x : w) {
    const double u = rng.uniform01();
    x = u * u * u * u;
  }
  return lm::Distribution::normalized(std::move(w));
}

}  // namespace

static void BM_SampleStep(benchmark::State& state) {
  const auto d = peaked(static_cast<std::size_t>(state.range(1)));
  decoding::DecodingConfig c;
  c.method = static_cast<decoding::Method>(state.range(0));
  Rng rng(12);
  for (auto _ : state) benchmark::DoNotOptimize(decoding::sample_step(d, c, rng));
}
BENCHMARK(BM_SampleStep)
    ->ArgNames({"method", "vocab"})
    ->Args({static_cast<int>(decoding::Method::TopK), 1000})
    ->Args({static_cast<int>(decoding::Method::TopP), 1000})
    ->Args({static_cast<int>(decoding::Method::TopPK), 1000})
    ->Args({static_cast<int>(decoding::Method::TopK), 50000});

static void BM_BeamSearch(benchmark::State& state) {
  const auto& m = model();
  decoding::DecodingConfig c;
  c.method = decoding::Method::BeamSearch;
  c.beams = static_cast<std::size_t>(state.range(0));
  c.max_len = 32;
  const std::vector<lm::TokenId> prompt{m.vocabulary().bos()};
  for (auto _ : state) benchmark::DoNotOptimize(decoding::beam_search(m, prompt, c));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_SampleSequence(benchmark::State& state) {
  const auto& m = model();
  decoding::DecodingConfig c;
  c.method = decoding::Method::TopK;
  c.max_len = 32;
  const std::vector<lm::TokenId> prompt{m.vocabulary().bos()};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(decoding::sample_sequence(m, prompt, c, ++seed));
}
BENCHMARK(BM_SampleSequence)->Unit(benchmark::kMillisecond);
