#include <benchmark/benchmark.h>

#include "hopmix/mixer.hpp"
#include "hopmix/rng.hpp"

using namespace hopmix;

static void BM_ParallelBlock(benchmark::State& state) {
    const auto tokens = static_cast<std::size_t>(state.range(0));
    const auto channels = static_cast<std::size_t>(state.range(1));
    Rng rng(3);
    const MixerBlock block = make_mixer_block(WeightMode::Symmetric, tokens, channels, rng, {});
    const Matrix2D x = rng.normal_matrix(tokens, channels);
    for (auto _ : state) {
        benchmark::DoNotOptimize(parallel_block(x, block));
    }
}
BENCHMARK(BM_ParallelBlock)->Args({4, 8})->Args({16, 32})->Args({64, 128});

static void BM_BlockEnergy(benchmark::State& state) {
    const auto tokens = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    const MixerBlock block = make_mixer_block(WeightMode::Symmetric, tokens, 2 * tokens, rng, {});
    const Matrix2D x = rng.normal_matrix(tokens, 2 * tokens);
    for (auto _ : state) {
        benchmark::DoNotOptimize(block_energy(x, block));
    }
}
BENCHMARK(BM_BlockEnergy)->Arg(8)->Arg(32);
