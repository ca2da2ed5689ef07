#include <benchmark/benchmark.h>

#include "hopmix/matrix.hpp"
#include "hopmix/rng.hpp"

using namespace hopmix;

static void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix2D a = rng.normal_matrix(n, n);
    const Matrix2D b = rng.normal_matrix(n, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

static void BM_MatmulTransposed(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Matrix2D a = rng.normal_matrix(n, n);
    const Matrix2D b = rng.normal_matrix(n, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul_tn(a, b));
    }
}
BENCHMARK(BM_MatmulTransposed)->Arg(64);

BENCHMARK_MAIN();
