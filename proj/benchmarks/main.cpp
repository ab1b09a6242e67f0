// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point is built here.
BENCHMARK_MAIN();
