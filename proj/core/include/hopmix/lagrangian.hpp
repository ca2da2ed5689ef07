#pragma once

#include <span>
#include <string>
#include <vector>

#include "hopmix/matrix.hpp"

namespace hopmix {

// Scalar gelu and its exact primitive. gelu uses the erf form, not the tanh
// approximation; the pseudo energy is defined through the exact primitive.
double gelu(double z);
double gelu_prime(double z);
// G(z) = (z^2 + (z^2 - 1) erf(z/sqrt(2)) + z sqrt(2/pi) exp(-z^2/2)) / 4,
// with G' = gelu and G(0) = 0.
double gelu_primitive(double z);

enum class LagrangianKind {
    LayerNorm,      // D*gamma*sqrt(sum(x-mean)^2/D + eps) + sum(delta_i x_i)
    ReluSquared,    // sum max(x,0)^2 / 2
    GeluPrimitive,  // sum G(x_i)
    CenteredNorm,   // sqrt(sum(x-mean)^2 + eps)
};

const char* lagrangian_kind_name(LagrangianKind kind);

// Tagged description of a layer Lagrangian. The gradient of the Lagrangian is
// the layer's activation function; the Hessian controls energy descent.
struct LagrangianSpec {
    LagrangianKind kind = LagrangianKind::CenteredNorm;
    double gamma = 1.0;         // LayerNorm scale
    std::vector<double> delta;  // LayerNorm shift; empty means zero
    double eps = 1e-6;          // regularizer, LayerNorm and CenteredNorm
    double scale_dim = 1.0;     // LayerNorm's D constant

    static LagrangianSpec relu_squared();
    static LagrangianSpec gelu_primitive();
    static LagrangianSpec centered_norm(double eps = 1e-6);
    static LagrangianSpec layer_norm(double gamma, std::vector<double> delta, double eps,
                                     double scale_dim);

    // Elementwise kinds act on each coordinate independently; norm kinds
    // couple all coordinates through the mean and norm.
    bool elementwise() const {
        return kind == LagrangianKind::ReluSquared || kind == LagrangianKind::GeluPrimitive;
    }
};

double lagrangian_value(const LagrangianSpec& spec, std::span<const double> x);

// Gradient of the value, i.e. the activation function the Lagrangian induces.
// Throws NumericError for a constant input when eps == 0 (singular norm).
Vector lagrangian_activation(const LagrangianSpec& spec, std::span<const double> x);
void lagrangian_activation(const LagrangianSpec& spec, std::span<const double> x,
                           std::span<double> out);

// Symmetric matrix of second derivatives (analytic for every kind).
Matrix2D lagrangian_hessian(const LagrangianSpec& spec, std::span<const double> x);

// out += H(x) * g without materializing the Hessian. This is the Jacobian-
// transpose product of the activation, used by the backward passes.
void lagrangian_hessian_apply(const LagrangianSpec& spec, std::span<const double> x,
                              std::span<const double> g, std::span<double> out);

}  // namespace hopmix
