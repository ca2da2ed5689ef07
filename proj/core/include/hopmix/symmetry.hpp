#pragma once

#include <vector>

#include "hopmix/hopfield.hpp"
#include "hopmix/io.hpp"
#include "hopmix/mixer.hpp"
#include "hopmix/rng.hpp"

namespace hopmix {

// Symmetric sampling box for pseudo-energy landscapes; coordinates are built
// antisymmetrically so reflected grid points are exactly grid points.
struct GridSpec {
    double extent = 3.0;  // samples [-extent, extent] on both axes
    std::size_t n_points = 201;
};

struct LandscapeGrid {
    GridSpec spec;
    std::vector<double> coords;  // n_points values, coords[n-1-i] == -coords[i]
    Matrix2D values;             // values(i, j) = E(x1 = coords[i], x2 = coords[j])

    std::vector<LandscapePoint> points() const;
};

// Pseudo energy over a 2D visible layer (requires n_vs == 2, n_vc == 1).
// Rows are sampled in parallel; outputs are schedule-independent.
LandscapeGrid sample_landscape(const HierarchicalNet& net, const GridSpec& spec);

// max |E(x1, x2) - E(-x2, -x1)|: discrepancy under reflection across the
// line x1 + x2 = 0, the symmetry of the symmetric-weight landscape.
double reflection_discrepancy(const LandscapeGrid& grid);
// max |E(x1, x2) - E(x2, x1)|: the swap reflection, reported as a diagnostic.
double swap_discrepancy(const LandscapeGrid& grid);

// Visible-only flow dx/dt = W2 gs(W1 LN x) + gc(LN x W3) W4 - x with the
// pseudo energy sampled along the trajectory.
struct ReducedRun {
    EnergyTrace trace;
    Matrix2D final_xv;
};
ReducedRun integrate_reduced(const MixerBlock& block, Matrix2D xv0, const IntegrateOptions& opts,
                             double decay = 1.0);

struct Attractor {
    Matrix2D state;
    std::size_t basin_count = 0;
    double energy = 0.0;
    double residual = 0.0;  // max-abs of the flow at the cluster center
};

struct AttractorSet {
    std::vector<Attractor> attractors;
    double min_pairwise_distance = 0.0;
    // Endpoint spreads along/transverse to the all-ones direction (2-neuron
    // visible layers only, 0 otherwise).
    double spread_along = 0.0;
    double spread_transverse = 0.0;
    bool zero_mode_valley = false;
    double max_line_distance = 0.0;  // max |x1 - x2| over endpoints (2-neuron case)
};

struct AttractorSearchOptions {
    IntegrateOptions integrate;
    double init_range = 2.0;      // inits uniform in [-r, r] per entry
    double cluster_radius = 1e-3; // single-linkage threshold
};

// Integrates the reduced flow from random initial grids and clusters the
// endpoints (single linkage).
AttractorSet find_attractors(const HierarchicalNet& net, std::size_t n_inits, Rng& rng,
                             const AttractorSearchOptions& opts = {});

// Pseudo-energy traces from random initial states.
std::vector<EnergyTrace> energy_over_time(const HierarchicalNet& net, std::size_t n_trajectories,
                                          Rng& rng, const AttractorSearchOptions& opts = {});

// Draws Gaussian symmetry-breaking blocks scaled relative to the RMS entry of
// the symmetric interactions (scale 0 leaves the net symmetric).
void apply_symmetry_breaking(HierarchicalNet& net, double relative_scale, Rng& rng);

}  // namespace hopmix
