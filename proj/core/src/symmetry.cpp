#include "hopmix/symmetry.hpp"

#include <algorithm>
#include <cmath>

#include "hopmix/parallel.hpp"

namespace hopmix {

std::vector<LandscapePoint> LandscapeGrid::points() const {
    std::vector<LandscapePoint> pts;
    pts.reserve(coords.size() * coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
        for (std::size_t j = 0; j < coords.size(); ++j)
            pts.push_back({coords[i], coords[j], values(i, j)});
    return pts;
}

LandscapeGrid sample_landscape(const HierarchicalNet& net, const GridSpec& spec) {
    net.validate();
    if (net.n_vs != 2 || net.n_vc != 1) {
        throw DimensionError("sample_landscape: requires (n_vs, n_vc) = (2, 1), got (" +
                             std::to_string(net.n_vs) + ", " + std::to_string(net.n_vc) + ")");
    }
    if (spec.n_points < 2) throw ConfigError("sample_landscape: grid needs >= 2 points");
    const MixerBlock block = to_mixer_block(net);

    LandscapeGrid grid;
    grid.spec = spec;
    grid.coords.resize(spec.n_points);
    const std::size_t n = spec.n_points;
    const double step = 2.0 * spec.extent / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        const double v = -spec.extent + static_cast<double>(i) * step;
        grid.coords[i] = v;
        grid.coords[n - 1 - i] = -v;  // exact antisymmetry
    }
    if (n % 2 == 1) grid.coords[n / 2] = 0.0;

    grid.values = Matrix2D(n, n);
    parallel_for(n, [&](std::size_t i) {
        Matrix2D x(2, 1);
        for (std::size_t j = 0; j < n; ++j) {
            x(0, 0) = grid.coords[i];
            x(1, 0) = grid.coords[j];
            grid.values(i, j) = block_energy(x, block);
        }
    });
    return grid;
}

double reflection_discrepancy(const LandscapeGrid& grid) {
    const std::size_t n = grid.coords.size();
    double d = 0.0;
    // (x1, x2) -> (-x2, -x1) maps index (i, j) to (n-1-j, n-1-i).
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d = std::max(d, std::abs(grid.values(i, j) - grid.values(n - 1 - j, n - 1 - i)));
    return d;
}

double swap_discrepancy(const LandscapeGrid& grid) {
    const std::size_t n = grid.coords.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d = std::max(d, std::abs(grid.values(i, j) - grid.values(j, i)));
    return d;
}

ReducedRun integrate_reduced(const MixerBlock& block, Matrix2D xv, const IntegrateOptions& opts,
                             double decay) {
    if (opts.dt <= 0.0) throw NumericError("integrate_reduced: dt must be positive");
    ReducedRun run;
    run.trace.times.push_back(0.0);
    run.trace.energies.push_back(block_energy(xv, block));

    std::size_t quiet = 0;
    for (std::size_t step = 0; step < opts.steps; ++step) {
        Matrix2D next = xv;
        if (opts.method == Integrator::Euler) {
            next += reduced_flow_rhs(xv, block, decay) * opts.dt;
        } else {
            const Matrix2D k1 = reduced_flow_rhs(xv, block, decay);
            const Matrix2D k2 = reduced_flow_rhs(xv + k1 * (0.5 * opts.dt), block, decay);
            const Matrix2D k3 = reduced_flow_rhs(xv + k2 * (0.5 * opts.dt), block, decay);
            const Matrix2D k4 = reduced_flow_rhs(xv + k3 * opts.dt, block, decay);
            next += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (opts.dt / 6.0);
        }
        if (!all_finite(next)) {
            throw NumericError("integrate_reduced: state diverged at step " +
                               std::to_string(step + 1));
        }
        const double delta = max_abs_diff(next, xv);
        xv = std::move(next);
        run.trace.times.push_back(static_cast<double>(step + 1) * opts.dt);
        run.trace.energies.push_back(block_energy(xv, block));
        run.trace.steps_taken = step + 1;
        quiet = delta < opts.tol ? quiet + 1 : 0;
        if (quiet >= opts.tol_window) {
            run.trace.converged = true;
            if (opts.stop_on_convergence) break;
        }
    }
    run.final_xv = std::move(xv);
    return run;
}

namespace {

double endpoint_distance(const Matrix2D& a, const Matrix2D& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.flat()[i] - b.flat()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Single-linkage clustering with a fixed merge radius; deterministic given
// the endpoint order.
std::vector<std::vector<std::size_t>> cluster_endpoints(const std::vector<Matrix2D>& pts,
                                                        double radius) {
    std::vector<int> cluster_of(pts.size(), -1);
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (cluster_of[i] >= 0) continue;
        // breadth-first growth of a new cluster
        std::vector<std::size_t> members{i};
        cluster_of[i] = static_cast<int>(clusters.size());
        for (std::size_t m = 0; m < members.size(); ++m) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                if (cluster_of[j] >= 0) continue;
                if (endpoint_distance(pts[members[m]], pts[j]) <= radius) {
                    cluster_of[j] = cluster_of[i];
                    members.push_back(j);
                }
            }
        }
        clusters.push_back(std::move(members));
    }
    return clusters;
}

}  // namespace

AttractorSet find_attractors(const HierarchicalNet& net, std::size_t n_inits, Rng& rng,
                             const AttractorSearchOptions& opts) {
    if (n_inits < 2) throw ConfigError("find_attractors: needs at least 2 initial states");
    const MixerBlock block = to_mixer_block(net);

    // Draw all starts first so worker count cannot affect the stream.
    std::vector<Matrix2D> starts;
    starts.reserve(n_inits);
    for (std::size_t i = 0; i < n_inits; ++i) {
        starts.push_back(
            rng.uniform_matrix(net.n_vs, net.n_vc, -opts.init_range, opts.init_range));
    }
    std::vector<Matrix2D> endpoints(n_inits);
    parallel_for(n_inits, [&](std::size_t i) {
        endpoints[i] = integrate_reduced(block, starts[i], opts.integrate).final_xv;
    });

    AttractorSet set;
    const auto clusters = cluster_endpoints(endpoints, opts.cluster_radius);
    for (const auto& members : clusters) {
        Attractor a;
        a.state = Matrix2D(net.n_vs, net.n_vc);
        for (std::size_t idx : members) a.state += endpoints[idx];
        a.state *= 1.0 / static_cast<double>(members.size());
        a.basin_count = members.size();
        a.energy = block_energy(a.state, block);
        a.residual = max_abs(reduced_flow_rhs(a.state, block, 1.0));
        set.attractors.push_back(std::move(a));
    }
    std::sort(set.attractors.begin(), set.attractors.end(),
              [](const Attractor& a, const Attractor& b) { return a.basin_count > b.basin_count; });

    set.min_pairwise_distance = 0.0;
    for (std::size_t i = 0; i < set.attractors.size(); ++i) {
        for (std::size_t j = i + 1; j < set.attractors.size(); ++j) {
            const double d = endpoint_distance(set.attractors[i].state, set.attractors[j].state);
            if (set.min_pairwise_distance == 0.0 || d < set.min_pairwise_distance) {
                set.min_pairwise_distance = d;
            }
        }
    }

    if (net.n_vs == 2 && net.n_vc == 1) {
        double lo_a = 0.0, hi_a = 0.0, lo_t = 0.0, hi_t = 0.0;
        for (std::size_t i = 0; i < endpoints.size(); ++i) {
            const double x1 = endpoints[i](0, 0), x2 = endpoints[i](1, 0);
            const double along = (x1 + x2) * M_SQRT1_2;
            const double trans = (x1 - x2) * M_SQRT1_2;
            if (i == 0) {
                lo_a = hi_a = along;
                lo_t = hi_t = trans;
            } else {
                lo_a = std::min(lo_a, along);
                hi_a = std::max(hi_a, along);
                lo_t = std::min(lo_t, trans);
                hi_t = std::max(hi_t, trans);
            }
            set.max_line_distance = std::max(set.max_line_distance, std::abs(x1 - x2));
        }
        set.spread_along = hi_a - lo_a;
        set.spread_transverse = hi_t - lo_t;
        set.zero_mode_valley = set.spread_along > 10.0 * set.spread_transverse;
    }
    return set;
}

std::vector<EnergyTrace> energy_over_time(const HierarchicalNet& net, std::size_t n_trajectories,
                                          Rng& rng, const AttractorSearchOptions& opts) {
    const MixerBlock block = to_mixer_block(net);
    std::vector<Matrix2D> starts;
    starts.reserve(n_trajectories);
    for (std::size_t i = 0; i < n_trajectories; ++i) {
        starts.push_back(
            rng.uniform_matrix(net.n_vs, net.n_vc, -opts.init_range, opts.init_range));
    }
    std::vector<EnergyTrace> traces(n_trajectories);
    parallel_for(n_trajectories, [&](std::size_t i) {
        traces[i] = integrate_reduced(block, starts[i], opts.integrate).trace;
    });
    return traces;
}

void apply_symmetry_breaking(HierarchicalNet& net, double relative_scale, Rng& rng) {
    if (relative_scale == 0.0) {
        net.asym_vs.reset();
        net.asym_vc.reset();
        return;
    }
    const double sym_sq = frobenius_norm_sq(net.xi_sv) + frobenius_norm_sq(net.xi_cv);
    const double sym_n = static_cast<double>(net.xi_sv.size() + net.xi_cv.size());
    const double rms = std::sqrt(sym_sq / sym_n);
    const double scale = relative_scale * rms;
    net.asym_vs = rng.normal_matrix(net.n_vs, net.n_s, scale);
    net.asym_vc = rng.normal_matrix(net.n_vc, net.n_c, scale);
}

}  // namespace hopmix
