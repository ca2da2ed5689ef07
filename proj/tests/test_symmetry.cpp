#include <cmath>

#include "doctest.h"
#include "hopmix/rng.hpp"
#include "hopmix/symmetry.hpp"

using namespace hopmix;

namespace {

HierarchicalNet toy_net(Rng& rng, double scale, std::size_t ns = 6, std::size_t nc = 6) {
    HierarchicalNet net;
    net.n_s = ns;
    net.n_vs = 2;
    net.n_vc = 1;
    net.n_c = nc;
    net.xi_sv = rng.normal_matrix(ns, 2, scale);
    net.xi_cv = rng.normal_matrix(nc, 1, scale);
    net.lagr_s = LagrangianSpec::gelu_primitive();
    net.lagr_c = LagrangianSpec::gelu_primitive();
    net.lagr_v = LagrangianSpec::centered_norm(1e-3);
    return net;
}

}  // namespace

TEST_CASE("zero-weight landscape matches the closed form and is swap-symmetric") {
    Rng rng(81);
    HierarchicalNet net = toy_net(rng, 0.0);
    net.xi_sv.fill(0.0);
    net.xi_cv.fill(0.0);
    GridSpec spec;
    spec.extent = 3.0;
    spec.n_points = 41;
    const LandscapeGrid grid = sample_landscape(net, spec);

    const double eps = 1e-3;
    for (std::size_t i = 0; i < spec.n_points; i += 5) {
        for (std::size_t j = 0; j < spec.n_points; j += 5) {
            const double x1 = grid.coords[i], x2 = grid.coords[j];
            const double s = 0.5 * (x1 - x2) * (x1 - x2);
            // E = x^T LN(x) - sqrt(S + eps) = S/sqrt(S+eps) - sqrt(S+eps)
            const double expected = s / std::sqrt(s + eps) - std::sqrt(s + eps);
            CHECK(std::abs(grid.values(i, j) - expected) < 1e-12);
        }
    }
    CHECK(swap_discrepancy(grid) < 1e-9);
    CHECK(reflection_discrepancy(grid) < 1e-9);
}

TEST_CASE("landscape is symmetric across x1 + x2 = 0 regardless of breaking") {
    // The pseudo energy depends on the grid only through LN(x), which for a
    // 2x1 state is a function of x1 - x2 alone; the reflection
    // (x1, x2) -> (-x2, -x1) keeps that difference, so the discrepancy stays
    // at rounding level for symmetric and for broken weights alike.
    Rng rng(82);
    HierarchicalNet net = toy_net(rng, 0.8);
    GridSpec spec;
    spec.extent = 3.0;
    spec.n_points = 81;
    const LandscapeGrid sym_grid = sample_landscape(net, spec);
    CHECK(reflection_discrepancy(sym_grid) < 1e-9);

    apply_symmetry_breaking(net, 0.1, rng);
    const LandscapeGrid asym_grid = sample_landscape(net, spec);
    CHECK(reflection_discrepancy(asym_grid) < 1e-9);

    // The swap reflection is the one a generic perturbation could move; report both.
    INFO("sym swap discrepancy ", swap_discrepancy(sym_grid));
    INFO("asym swap discrepancy ", swap_discrepancy(asym_grid));
    CHECK(swap_discrepancy(asym_grid) >= 0.0);
}

TEST_CASE("landscape requires the 2x1 visible grid") {
    Rng rng(83);
    HierarchicalNet net = toy_net(rng, 0.5);
    net.n_vs = 3;
    net.xi_sv = rng.normal_matrix(net.n_s, 3, 0.5);
    CHECK_THROWS_AS(sample_landscape(net, GridSpec{}), DimensionError);
}

TEST_CASE("zero weights give a single attractor at the regularized origin") {
    Rng rng(84);
    HierarchicalNet net = toy_net(rng, 0.0);
    net.xi_sv.fill(0.0);
    net.xi_cv.fill(0.0);
    AttractorSearchOptions opts;
    opts.integrate.dt = 1e-2;
    opts.integrate.steps = 4000;
    const AttractorSet set = find_attractors(net, 12, rng, opts);
    CHECK(set.attractors.size() == 1);
    CHECK(max_abs(set.attractors[0].state) < 1e-5);
    CHECK(set.attractors[0].residual < 1e-5);
}

TEST_CASE("symmetric weights give the two saturation attractors off the line") {
    Rng rng(85);
    HierarchicalNet net = toy_net(rng, 0.8);
    AttractorSearchOptions opts;
    opts.integrate.dt = 1e-2;
    opts.integrate.steps = 6000;
    const AttractorSet set = find_attractors(net, 24, rng, opts);
    // One attractor per LN saturation branch; each keeps token-difference
    // drive a * gelu(a) + |w|^2/2 > 0, so neither sits on the x1 = x2 line.
    CHECK(set.attractors.size() == 2);
    CHECK(set.max_line_distance > 1e-2);
    for (const auto& a : set.attractors) CHECK(a.residual < 1e-4);
}

TEST_CASE("symmetry breaking keeps at least two isolated attractors") {
    Rng rng(86);
    HierarchicalNet net = toy_net(rng, 0.8);
    apply_symmetry_breaking(net, 0.1, rng);
    AttractorSearchOptions opts;
    opts.integrate.dt = 1e-2;
    opts.integrate.steps = 6000;
    const AttractorSet set = find_attractors(net, 24, rng, opts);
    CHECK(set.attractors.size() >= 2);
    CHECK(set.min_pairwise_distance > 10.0 * opts.cluster_radius);
}

TEST_CASE("pseudo energy descends strictly with relu hiddens") {
    Rng rng(87);
    HierarchicalNet net = toy_net(rng, 0.8);
    net.lagr_s = LagrangianSpec::relu_squared();
    net.lagr_c = LagrangianSpec::relu_squared();
    AttractorSearchOptions opts;
    opts.integrate.method = Integrator::Euler;
    opts.integrate.dt = 1e-3;
    opts.integrate.steps = 5000;
    for (const auto& trace : energy_over_time(net, 6, rng, opts)) {
        CHECK(trace.max_energy_increase() <= 1e-6);
    }
}

TEST_CASE("pseudo energy descends within the documented gelu slack") {
    Rng rng(88);
    HierarchicalNet net = toy_net(rng, 0.8);
    AttractorSearchOptions opts;
    opts.integrate.method = Integrator::Euler;
    opts.integrate.dt = 1e-3;
    opts.integrate.steps = 5000;
    double worst = 0.0;
    for (const auto& trace : energy_over_time(net, 6, rng, opts)) {
        worst = std::max(worst, trace.max_energy_increase());
    }
    INFO("largest per-step increase with gelu hiddens ", worst);
    CHECK(worst <= 1e-3);
}

namespace {

// Largest ascent E_j - min_{i<=j} E_i along a trace: the size of an energy
// increase event rather than a single-step delta.
double max_rise(const EnergyTrace& t) {
    double low = t.energies.empty() ? 0.0 : t.energies[0];
    double rise = 0.0;
    for (double e : t.energies) {
        low = std::min(low, e);
        rise = std::max(rise, e - low);
    }
    return rise;
}

HierarchicalNet fig7_net(Rng& rng, double scale) {
    HierarchicalNet net;
    net.n_s = 20;
    net.n_vs = 4;
    net.n_vc = 8;
    net.n_c = 160;
    net.xi_sv = rng.normal_matrix(20, 4, scale);
    net.xi_cv = rng.normal_matrix(160, 8, scale / 4.0);
    net.lagr_s = LagrangianSpec::gelu_primitive();
    net.lagr_c = LagrangianSpec::gelu_primitive();
    net.lagr_v = LagrangianSpec::centered_norm(1e-3);
    return net;
}

}  // namespace

TEST_CASE("a broken-symmetry trajectory can gain energy; witness reported") {
    AttractorSearchOptions opts;
    opts.integrate.method = Integrator::RK4;
    opts.integrate.dt = 0.02;
    opts.integrate.steps = 1500;
    bool witnessed = false;
    std::uint64_t witness_seed = 0;
    double witness_rise = 0.0;
    for (std::uint64_t seed = 0; seed < 10 && !witnessed; ++seed) {
        Rng rng(seed);
        HierarchicalNet net = fig7_net(rng, 0.5);
        apply_symmetry_breaking(net, 0.1, rng);
        for (const auto& trace : energy_over_time(net, 5, rng, opts)) {
            if (max_rise(trace) > 1e-4) {
                witnessed = true;
                witness_seed = seed;
                witness_rise = max_rise(trace);
                break;
            }
        }
    }
    INFO("witness seed ", witness_seed, " rise ", witness_rise);
    CHECK(witnessed);
}

TEST_CASE("fig-7 scale configuration converges with few attractor clusters") {
    Rng rng(89);
    HierarchicalNet net = fig7_net(rng, 0.1);

    AttractorSearchOptions opts;
    opts.integrate.dt = 1e-2;
    opts.integrate.steps = 30000;
    opts.cluster_radius = 1e-2;
    const AttractorSet set = find_attractors(net, 12, rng, opts);
    for (const auto& trace : energy_over_time(net, 4, rng, opts)) {
        CHECK(trace.converged);
    }
    INFO("clusters ", set.attractors.size());
    CHECK(set.attractors.size() <= net.n_vs);
    for (const auto& a : set.attractors) CHECK(a.residual < 1e-4);
}

TEST_CASE("symmetry breaking scale is relative to the symmetric rms") {
    Rng rng(90);
    HierarchicalNet net = toy_net(rng, 0.8);
    apply_symmetry_breaking(net, 0.1, rng);
    REQUIRE(net.asym_vs.has_value());
    REQUIRE(net.asym_vc.has_value());
    const double sym_rms = std::sqrt((frobenius_norm_sq(net.xi_sv) + frobenius_norm_sq(net.xi_cv)) /
                                     static_cast<double>(net.xi_sv.size() + net.xi_cv.size()));
    const double asym_rms =
        std::sqrt((frobenius_norm_sq(*net.asym_vs) + frobenius_norm_sq(*net.asym_vc)) /
                  static_cast<double>(net.asym_vs->size() + net.asym_vc->size()));
    CHECK(asym_rms < 0.3 * sym_rms);
    CHECK(asym_rms > 0.02 * sym_rms);

    apply_symmetry_breaking(net, 0.0, rng);
    CHECK(net.symmetric());
}
