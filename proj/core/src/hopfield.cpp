#include "hopmix/hopfield.hpp"

#include <cmath>
#include <string>

namespace hopmix {

void TwoLayerNet::validate() const {
    if (n_visible == 0 || n_hidden == 0) {
        throw DimensionError("TwoLayerNet: layer sizes must be positive");
    }
    if (xi.rows() != n_hidden || xi.cols() != n_visible) {
        throw DimensionError("TwoLayerNet: xi shape " + shape_str(xi) + " does not match (" +
                             std::to_string(n_hidden) + "x" + std::to_string(n_visible) + ")");
    }
    if (tau_v <= 0.0 || tau_h <= 0.0) {
        throw NumericError("TwoLayerNet: time constants must be positive");
    }
}

void HierarchicalNet::validate() const {
    if (n_s == 0 || n_vs == 0 || n_vc == 0 || n_c == 0) {
        throw DimensionError("HierarchicalNet: layer sizes must be positive");
    }
    if (xi_sv.rows() != n_s || xi_sv.cols() != n_vs) {
        throw DimensionError("HierarchicalNet: xi_sv shape " + shape_str(xi_sv) +
                             " does not match (" + std::to_string(n_s) + "x" +
                             std::to_string(n_vs) + ")");
    }
    if (xi_cv.rows() != n_c || xi_cv.cols() != n_vc) {
        throw DimensionError("HierarchicalNet: xi_cv shape " + shape_str(xi_cv) +
                             " does not match (" + std::to_string(n_c) + "x" +
                             std::to_string(n_vc) + ")");
    }
    if (asym_vs && (asym_vs->rows() != n_vs || asym_vs->cols() != n_s)) {
        throw DimensionError("HierarchicalNet: asym_vs shape " + shape_str(*asym_vs) +
                             " does not match (" + std::to_string(n_vs) + "x" +
                             std::to_string(n_s) + ")");
    }
    if (asym_vc && (asym_vc->rows() != n_vc || asym_vc->cols() != n_c)) {
        throw DimensionError("HierarchicalNet: asym_vc shape " + shape_str(*asym_vc) +
                             " does not match (" + std::to_string(n_vc) + "x" +
                             std::to_string(n_c) + ")");
    }
    if (tau_s <= 0.0 || tau_v <= 0.0 || tau_c <= 0.0) {
        throw NumericError("HierarchicalNet: time constants must be positive");
    }
}

Matrix2D HierarchicalNet::xi_vs() const {
    Matrix2D m = transpose(xi_sv);
    if (asym_vs) m += *asym_vs;
    return m;
}

Matrix2D HierarchicalNet::xi_vc() const {
    Matrix2D m = transpose(xi_cv);
    if (asym_vc) m += *asym_vc;
    return m;
}

HierarchicalState zero_state(const HierarchicalNet& net) {
    return HierarchicalState{Matrix2D(net.n_s, net.n_vc), Matrix2D(net.n_vs, net.n_vc),
                             Matrix2D(net.n_vs, net.n_c)};
}

namespace {

void check_state(const HierarchicalNet& net, const HierarchicalState& s) {
    if (s.xs.rows() != net.n_s || s.xs.cols() != net.n_vc || s.xv.rows() != net.n_vs ||
        s.xv.cols() != net.n_vc || s.xc.rows() != net.n_vs || s.xc.cols() != net.n_c) {
        throw DimensionError("HierarchicalState: shapes xs" + shape_str(s.xs) + " xv" +
                             shape_str(s.xv) + " xc" + shape_str(s.xc) +
                             " do not match net dims (" + std::to_string(net.n_s) + "," +
                             std::to_string(net.n_vs) + "," + std::to_string(net.n_vc) + "," +
                             std::to_string(net.n_c) + ")");
    }
}

Matrix2D activation_grid(const LagrangianSpec& spec, const Matrix2D& x) {
    Matrix2D out(x.rows(), x.cols());
    lagrangian_activation(spec, x.flat(), out.flat());
    return out;
}

}  // namespace

double energy_two_layer(const TwoLayerNet& net, std::span<const double> v,
                        std::span<const double> h) {
    net.validate();
    if (v.size() != net.n_visible || h.size() != net.n_hidden) {
        throw DimensionError("energy_two_layer: state lengths (" + std::to_string(v.size()) +
                             "," + std::to_string(h.size()) + ") do not match net (" +
                             std::to_string(net.n_visible) + "," + std::to_string(net.n_hidden) +
                             ")");
    }
    const Vector g = lagrangian_activation(net.lagr_v, v);
    const Vector f = lagrangian_activation(net.lagr_h, h);
    const Vector xig = matvec(net.xi, g);
    return dot(v, g) - lagrangian_value(net.lagr_v, v) + dot(h, f) -
           lagrangian_value(net.lagr_h, h) - dot(f, xig);
}

double energy_three_layer(const HierarchicalNet& net, const HierarchicalState& state) {
    net.validate();
    check_state(net, state);
    const Matrix2D gs = activation_grid(net.lagr_s, state.xs);
    const Matrix2D gv = activation_grid(net.lagr_v, state.xv);
    const Matrix2D gc = activation_grid(net.lagr_c, state.xc);

    double e = dot(state.xs, gs) - lagrangian_value(net.lagr_s, state.xs.flat()) +
               dot(state.xv, gv) - lagrangian_value(net.lagr_v, state.xv.flat()) +
               dot(state.xc, gc) - lagrangian_value(net.lagr_c, state.xc.flat());

    if (net.symmetric()) {
        // Canonical couplings: -<gv, xi_sv^T gs> - <gc, gv xi_cv^T>.
        e -= dot(matmul(net.xi_sv, gv), gs);
        e -= dot(gc, matmul_nt(gv, net.xi_cv));
    } else {
        // Interaction-symmetric extension. Equal to the canonical form when
        // the symmetry-breaking parts vanish.
        const Matrix2D xi_vs = net.xi_vs();
        const Matrix2D xi_vc = net.xi_vc();
        e -= 0.5 * (dot(gv, matmul(xi_vs, gs)) + dot(gs, matmul(net.xi_sv, gv)));
        e -= 0.5 * (dot(gc, matmul_nt(gv, net.xi_cv)) + dot(gv, matmul_nt(gc, xi_vc)));
    }
    return e;
}

double energy_metaformer(const HierarchicalNet& net, const HierarchicalState& state) {
    net.validate();
    check_state(net, state);
    if (net.lagr_s.kind != LagrangianKind::ReluSquared ||
        net.lagr_c.kind != LagrangianKind::ReluSquared ||
        net.lagr_v.kind != LagrangianKind::CenteredNorm) {
        throw ConfigError(
            "energy_metaformer: requires ReLU-squared hidden Lagrangians and a centered-norm "
            "visible Lagrangian");
    }
    if (!net.symmetric()) {
        throw ConfigError("energy_metaformer: defined for symmetric interactions only");
    }
    const Matrix2D ln = activation_grid(net.lagr_v, state.xv);
    const Matrix2D rs = activation_grid(net.lagr_s, state.xs);
    const Matrix2D rc = activation_grid(net.lagr_c, state.xc);

    // x^T relu(x) - sum max(x,0)^2 / 2 collapses to sum max(x,0)^2 / 2.
    double e = dot(state.xv, ln) - lagrangian_value(net.lagr_v, state.xv.flat());
    e += 0.5 * frobenius_norm_sq(rs);
    e += 0.5 * frobenius_norm_sq(rc);
    e -= dot(ln, matmul_tn(net.xi_sv, rs));
    e -= dot(rc, matmul_nt(ln, net.xi_cv));
    return e;
}

const char* integrator_name(Integrator m) {
    return m == Integrator::Euler ? "euler" : "rk4";
}

double EnergyTrace::max_energy_increase() const {
    double inc = 0.0;
    for (std::size_t i = 1; i < energies.size(); ++i) {
        inc = std::max(inc, energies[i] - energies[i - 1]);
    }
    return inc;
}

namespace {

// Minimal state algebra so one integrator template serves both nets.

void axpy(TwoLayerState& y, double a, const TwoLayerState& x) {
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += a * x.v[i];
    for (std::size_t i = 0; i < y.h.size(); ++i) y.h[i] += a * x.h[i];
}

void axpy(HierarchicalState& y, double a, const HierarchicalState& x) {
    for (std::size_t i = 0; i < y.xs.size(); ++i) y.xs.flat()[i] += a * x.xs.flat()[i];
    for (std::size_t i = 0; i < y.xv.size(); ++i) y.xv.flat()[i] += a * x.xv.flat()[i];
    for (std::size_t i = 0; i < y.xc.size(); ++i) y.xc.flat()[i] += a * x.xc.flat()[i];
}

double state_max_delta(const TwoLayerState& a, const TwoLayerState& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
    for (std::size_t i = 0; i < a.h.size(); ++i) d = std::max(d, std::abs(a.h[i] - b.h[i]));
    return d;
}

double state_max_delta(const HierarchicalState& a, const HierarchicalState& b) {
    return std::max({max_abs_diff(a.xs, b.xs), max_abs_diff(a.xv, b.xv),
                     max_abs_diff(a.xc, b.xc)});
}

bool state_finite(const TwoLayerState& s) { return all_finite(s.v) && all_finite(s.h); }

bool state_finite(const HierarchicalState& s) {
    return all_finite(s.xs) && all_finite(s.xv) && all_finite(s.xc);
}

struct TwoLayerSystem {
    const TwoLayerNet& net;

    TwoLayerState rhs(const TwoLayerState& s) const {
        const Vector g = lagrangian_activation(net.lagr_v, s.v);
        const Vector f = lagrangian_activation(net.lagr_h, s.h);
        TwoLayerState d{Vector(s.v.size()), Vector(s.h.size())};
        // tau_v dv/dt = xi^T f - v ; tau_h dh/dt = xi g - h
        for (std::size_t i = 0; i < s.v.size(); ++i) {
            double acc = 0.0;
            for (std::size_t mu = 0; mu < s.h.size(); ++mu) acc += net.xi(mu, i) * f[mu];
            d.v[i] = (acc - s.v[i]) / net.tau_v;
        }
        const Vector xig = matvec(net.xi, g);
        for (std::size_t mu = 0; mu < s.h.size(); ++mu) d.h[mu] = (xig[mu] - s.h[mu]) / net.tau_h;
        return d;
    }

    double energy(const TwoLayerState& s) const { return energy_two_layer(net, s.v, s.h); }
};

struct HierarchicalSystem {
    const HierarchicalNet& net;
    Matrix2D xi_vs;       // (n_vs x n_s), symmetry-breaking part included
    Matrix2D xi_vc_t;     // (n_c x n_vc) = xi_vc^T

    explicit HierarchicalSystem(const HierarchicalNet& n)
        : net(n), xi_vs(n.xi_vs()), xi_vc_t(transpose(n.xi_vc())) {}

    HierarchicalState rhs(const HierarchicalState& s) const {
        const Matrix2D gv = activation_grid(net.lagr_v, s.xv);
        const Matrix2D gs = activation_grid(net.lagr_s, s.xs);
        const Matrix2D gc = activation_grid(net.lagr_c, s.xc);

        Matrix2D dxs = matmul(net.xi_sv, gv);
        dxs -= s.xs;
        dxs *= 1.0 / net.tau_s;

        Matrix2D dxv = matmul(xi_vs, gs);
        dxv += matmul(gc, xi_vc_t);
        axpy_matrix(dxv, -net.visible_decay, s.xv);
        dxv *= 1.0 / net.tau_v;

        Matrix2D dxc = matmul_nt(gv, net.xi_cv);
        dxc -= s.xc;
        dxc *= 1.0 / net.tau_c;

        return HierarchicalState{std::move(dxs), std::move(dxv), std::move(dxc)};
    }

    double energy(const HierarchicalState& s) const { return energy_three_layer(net, s); }

private:
    static void axpy_matrix(Matrix2D& y, double a, const Matrix2D& x) {
        for (std::size_t i = 0; i < y.size(); ++i) y.flat()[i] += a * x.flat()[i];
    }
};

template <typename System, typename State>
std::pair<EnergyTrace, State> run_integration(const System& sys, State state,
                                              const IntegrateOptions& opts) {
    if (opts.dt <= 0.0) throw NumericError("integrate: dt must be positive");
    if (opts.steps == 0) throw NumericError("integrate: step count must be positive");

    EnergyTrace trace;
    trace.times.reserve(opts.steps + 1);
    trace.energies.reserve(opts.steps + 1);
    trace.times.push_back(0.0);
    trace.energies.push_back(sys.energy(state));

    std::size_t quiet_steps = 0;
    for (std::size_t step = 0; step < opts.steps; ++step) {
        State next = state;
        if (opts.method == Integrator::Euler) {
            const State k1 = sys.rhs(state);
            axpy(next, opts.dt, k1);
        } else {
            const State k1 = sys.rhs(state);
            State mid = state;
            axpy(mid, 0.5 * opts.dt, k1);
            const State k2 = sys.rhs(mid);
            mid = state;
            axpy(mid, 0.5 * opts.dt, k2);
            const State k3 = sys.rhs(mid);
            mid = state;
            axpy(mid, opts.dt, k3);
            const State k4 = sys.rhs(mid);
            axpy(next, opts.dt / 6.0, k1);
            axpy(next, opts.dt / 3.0, k2);
            axpy(next, opts.dt / 3.0, k3);
            axpy(next, opts.dt / 6.0, k4);
        }
        if (!state_finite(next)) {
            throw NumericError("integrate: state diverged at step " + std::to_string(step + 1));
        }
        const double delta = state_max_delta(next, state);
        state = std::move(next);
        trace.times.push_back(static_cast<double>(step + 1) * opts.dt);
        trace.energies.push_back(sys.energy(state));
        trace.steps_taken = step + 1;

        quiet_steps = delta < opts.tol ? quiet_steps + 1 : 0;
        if (quiet_steps >= opts.tol_window) {
            trace.converged = true;
            if (opts.stop_on_convergence) break;
        }
    }
    return {std::move(trace), std::move(state)};
}

}  // namespace

TwoLayerRun integrate(const TwoLayerNet& net, TwoLayerState initial,
                      const IntegrateOptions& opts) {
    net.validate();
    if (initial.v.size() != net.n_visible || initial.h.size() != net.n_hidden) {
        throw DimensionError("integrate: initial state lengths (" +
                             std::to_string(initial.v.size()) + "," +
                             std::to_string(initial.h.size()) + ") do not match net");
    }
    TwoLayerSystem sys{net};
    auto [trace, final_state] = run_integration(sys, std::move(initial), opts);
    return TwoLayerRun{std::move(trace), std::move(final_state)};
}

HierarchicalRun integrate(const HierarchicalNet& net, HierarchicalState initial,
                          const IntegrateOptions& opts) {
    net.validate();
    check_state(net, initial);
    HierarchicalSystem sys(net);
    auto [trace, final_state] = run_integration(sys, std::move(initial), opts);
    return HierarchicalRun{std::move(trace), std::move(final_state)};
}

AdiabaticPoint adiabatic_fixed_point(const HierarchicalNet& net, const Matrix2D& xv) {
    net.validate();
    if (xv.rows() != net.n_vs || xv.cols() != net.n_vc) {
        throw DimensionError("adiabatic_fixed_point: xv shape " + shape_str(xv) +
                             " does not match (" + std::to_string(net.n_vs) + "x" +
                             std::to_string(net.n_vc) + ")");
    }
    const Matrix2D gv = activation_grid(net.lagr_v, xv);
    return AdiabaticPoint{matmul(net.xi_sv, gv), matmul_nt(gv, net.xi_cv)};
}

Matrix2D denoise(const HierarchicalNet& net, const Matrix2D& noisy, const IntegrateOptions& opts) {
    HierarchicalState state = zero_state(net);
    if (noisy.rows() != net.n_vs || noisy.cols() != net.n_vc) {
        throw DimensionError("denoise: input shape " + shape_str(noisy) + " does not match (" +
                             std::to_string(net.n_vs) + "x" + std::to_string(net.n_vc) + ")");
    }
    state.xv = noisy;
    HierarchicalRun run = integrate(net, std::move(state), opts);
    return run.final_state.xv;
}

}  // namespace hopmix
