#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hopmix/lagrangian.hpp"
#include "hopmix/matrix.hpp"

namespace hopmix {

// Two-layer continuous Hopfield network. Only the hidden-to-visible direction
// is stored; the visible side always uses xi^T, so the symmetry of the
// interaction is structural.
struct TwoLayerNet {
    std::size_t n_visible = 0;
    std::size_t n_hidden = 0;
    Matrix2D xi;  // (n_hidden x n_visible)
    LagrangianSpec lagr_v;
    LagrangianSpec lagr_h;
    double tau_v = 1.0;
    double tau_h = 1.0;

    void validate() const;
};

struct TwoLayerState {
    Vector v;
    Vector h;
};

// Three-layer network with the visible layer in the middle. The visible state
// is a (n_vs x n_vc) grid; the token hidden interacts along rows and the
// channel hidden along columns:
//
//   hidden states:  xs (n_s x n_vc), xc (n_vs x n_c)
//   tau_s dxs/dt = xi_sv gv(xv) - xs
//   tau_v dxv/dt = xi_vs gs(xs) + gc(xc) xi_vc^T - alpha xv
//   tau_c dxc/dt = gv(xv) xi_cv^T - xc
//
// with xi_vs = xi_sv^T (+ asym_vs) and xi_vc = xi_cv^T (+ asym_vc). When the
// asym blocks are absent the interactions are symmetric and the canonical
// energy is a Lyapunov function. Lagrangians are evaluated on flattened
// states, which for the norm kinds gives the joint-axes normalization.
struct HierarchicalNet {
    std::size_t n_s = 0;
    std::size_t n_vs = 0;
    std::size_t n_vc = 0;
    std::size_t n_c = 0;
    Matrix2D xi_sv;                  // (n_s x n_vs)
    Matrix2D xi_cv;                  // (n_c x n_vc)
    std::optional<Matrix2D> asym_vs; // (n_vs x n_s)
    std::optional<Matrix2D> asym_vc; // (n_vc x n_c)
    LagrangianSpec lagr_s = LagrangianSpec::relu_squared();
    LagrangianSpec lagr_v = LagrangianSpec::centered_norm();
    LagrangianSpec lagr_c = LagrangianSpec::relu_squared();
    double tau_s = 1.0;
    double tau_v = 1.0;
    double tau_c = 1.0;
    // Decay coefficient on the visible equation. 1 matches the written ODEs;
    // 0 is the choice under which discretization yields the mixer update.
    double visible_decay = 1.0;

    bool symmetric() const { return !asym_vs.has_value() && !asym_vc.has_value(); }
    void validate() const;
    // Hidden-to-visible matrices with the symmetry-breaking part applied.
    Matrix2D xi_vs() const;  // (n_vs x n_s)
    Matrix2D xi_vc() const;  // (n_vc x n_c)
};

struct HierarchicalState {
    Matrix2D xs;  // (n_s x n_vc)
    Matrix2D xv;  // (n_vs x n_vc)
    Matrix2D xc;  // (n_vs x n_c)
};

HierarchicalState zero_state(const HierarchicalNet& net);

// E = <v,g(v)> - L_v + <h,f(h)> - L_h - f^T xi g
double energy_two_layer(const TwoLayerNet& net, std::span<const double> v,
                        std::span<const double> h);

// Canonical three-layer energy; with asym blocks present, the
// interaction-symmetric extension (identical to the canonical form when the
// symmetry-breaking parts vanish).
double energy_three_layer(const HierarchicalNet& net, const HierarchicalState& state);

// The same energy spelled out for ReLU hiddens and a centered-norm visible
// Lagrangian. Requires that configuration and must agree with
// energy_three_layer to float accuracy.
double energy_metaformer(const HierarchicalNet& net, const HierarchicalState& state);

enum class Integrator { Euler, RK4 };

struct IntegrateOptions {
    double dt = 1e-2;
    std::size_t steps = 1000;
    Integrator method = Integrator::RK4;
    // Converged when the state-delta infinity norm stays below tol for
    // tol_window consecutive steps.
    double tol = 1e-7;
    std::size_t tol_window = 10;
    bool stop_on_convergence = true;
};

const char* integrator_name(Integrator m);

// Time-indexed energy samples from one dynamics run.
struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> energies;
    bool converged = false;
    std::size_t steps_taken = 0;

    // Largest single-step energy increase (0 if the trace is monotone).
    double max_energy_increase() const;
};

struct TwoLayerRun {
    EnergyTrace trace;
    TwoLayerState final_state;
};

struct HierarchicalRun {
    EnergyTrace trace;
    HierarchicalState final_state;
};

// Integrates the coupled ODEs, sampling (t, E) every step. Throws
// NumericError naming the step index if the state leaves the finite range.
TwoLayerRun integrate(const TwoLayerNet& net, TwoLayerState initial,
                      const IntegrateOptions& opts);
HierarchicalRun integrate(const HierarchicalNet& net, HierarchicalState initial,
                          const IntegrateOptions& opts);

// Fast-variable fixed point of the adiabatic limit tau_v >> tau_s, tau_c:
//   xs = xi_sv gv(xv),  xc = gv(xv) xi_cv^T.
struct AdiabaticPoint {
    Matrix2D xs;
    Matrix2D xc;
};
AdiabaticPoint adiabatic_fixed_point(const HierarchicalNet& net, const Matrix2D& xv);

// Runs the full dynamics from (xs=0, xv=noisy, xc=0) and returns the visible
// component of the final state.
Matrix2D denoise(const HierarchicalNet& net, const Matrix2D& noisy, const IntegrateOptions& opts);

}  // namespace hopmix
