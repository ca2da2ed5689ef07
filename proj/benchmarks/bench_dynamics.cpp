#include <benchmark/benchmark.h>

#include "hopmix/hopfield.hpp"
#include "hopmix/rng.hpp"

using namespace hopmix;

namespace {

HierarchicalNet bench_net(std::size_t n) {
    Rng rng(5);
    HierarchicalNet net;
    net.n_s = n;
    net.n_vs = n / 2;
    net.n_vc = n / 2;
    net.n_c = n;
    net.xi_sv = rng.normal_matrix(net.n_s, net.n_vs, 0.3);
    net.xi_cv = rng.normal_matrix(net.n_c, net.n_vc, 0.3);
    return net;
}

}  // namespace

static void BM_IntegrateEuler(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const HierarchicalNet net = bench_net(n);
    Rng rng(6);
    HierarchicalState init{rng.normal_matrix(net.n_s, net.n_vc),
                           rng.normal_matrix(net.n_vs, net.n_vc),
                           rng.normal_matrix(net.n_vs, net.n_c)};
    IntegrateOptions opts;
    opts.method = Integrator::Euler;
    opts.dt = 1e-3;
    opts.steps = 100;
    opts.stop_on_convergence = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate(net, init, opts));
    }
    state.SetItemsProcessed(state.iterations() * opts.steps);
}
BENCHMARK(BM_IntegrateEuler)->Arg(8)->Arg(32);

static void BM_ThreeLayerEnergy(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const HierarchicalNet net = bench_net(n);
    Rng rng(7);
    const HierarchicalState s{rng.normal_matrix(net.n_s, net.n_vc),
                              rng.normal_matrix(net.n_vs, net.n_vc),
                              rng.normal_matrix(net.n_vs, net.n_c)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(energy_three_layer(net, s));
    }
}
BENCHMARK(BM_ThreeLayerEnergy)->Arg(8)->Arg(32);
