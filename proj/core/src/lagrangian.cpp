#include "hopmix/lagrangian.hpp"

#include <cmath>

namespace hopmix {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Sum of squared deviations from the mean.
double centered_sq_sum(std::span<const double> x, double mean) {
    double s = 0.0;
    for (double v : x) {
        const double d = v - mean;
        s += d * d;
    }
    return s;
}

void check_delta(const LagrangianSpec& spec, std::size_t n) {
    if (spec.kind == LagrangianKind::LayerNorm && !spec.delta.empty() && spec.delta.size() != n) {
        throw DimensionError("LayerNorm: delta length " + std::to_string(spec.delta.size()) +
                             " does not match input length " + std::to_string(n));
    }
}

}  // namespace

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2)); }

double gelu_prime(double z) {
    return 0.5 * (1.0 + std::erf(z * kInvSqrt2)) + z * kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double gelu_primitive(double z) {
    const double z2 = z * z;
    return 0.25 * (z2 + (z2 - 1.0) * std::erf(z * kInvSqrt2) +
                   z * std::sqrt(2.0 / M_PI) * std::exp(-0.5 * z2));
}

const char* lagrangian_kind_name(LagrangianKind kind) {
    switch (kind) {
        case LagrangianKind::LayerNorm: return "layer_norm";
        case LagrangianKind::ReluSquared: return "relu_squared";
        case LagrangianKind::GeluPrimitive: return "gelu_primitive";
        case LagrangianKind::CenteredNorm: return "centered_norm";
    }
    return "?";
}

LagrangianSpec LagrangianSpec::relu_squared() {
    LagrangianSpec s;
    s.kind = LagrangianKind::ReluSquared;
    return s;
}

LagrangianSpec LagrangianSpec::gelu_primitive() {
    LagrangianSpec s;
    s.kind = LagrangianKind::GeluPrimitive;
    return s;
}

LagrangianSpec LagrangianSpec::centered_norm(double eps) {
    LagrangianSpec s;
    s.kind = LagrangianKind::CenteredNorm;
    s.eps = eps;
    return s;
}

LagrangianSpec LagrangianSpec::layer_norm(double gamma, std::vector<double> delta, double eps,
                                          double scale_dim) {
    LagrangianSpec s;
    s.kind = LagrangianKind::LayerNorm;
    s.gamma = gamma;
    s.delta = std::move(delta);
    s.eps = eps;
    s.scale_dim = scale_dim;
    return s;
}

double lagrangian_value(const LagrangianSpec& spec, std::span<const double> x) {
    check_delta(spec, x.size());
    switch (spec.kind) {
        case LagrangianKind::ReluSquared: {
            double s = 0.0;
            for (double v : x)
                if (v > 0.0) s += v * v;
            return 0.5 * s;
        }
        case LagrangianKind::GeluPrimitive: {
            double s = 0.0;
            for (double v : x) s += gelu_primitive(v);
            return s;
        }
        case LagrangianKind::CenteredNorm: {
            const double m = mean_of(x);
            return std::sqrt(centered_sq_sum(x, m) + spec.eps);
        }
        case LagrangianKind::LayerNorm: {
            const double m = mean_of(x);
            double v = spec.scale_dim * spec.gamma *
                       std::sqrt(centered_sq_sum(x, m) / spec.scale_dim + spec.eps);
            if (!spec.delta.empty()) {
                for (std::size_t i = 0; i < x.size(); ++i) v += spec.delta[i] * x[i];
            }
            return v;
        }
    }
    throw ConfigError("lagrangian_value: unknown kind");
}

void lagrangian_activation(const LagrangianSpec& spec, std::span<const double> x,
                           std::span<double> out) {
    if (out.size() != x.size()) {
        throw DimensionError("lagrangian_activation: output length " + std::to_string(out.size()) +
                             " vs input length " + std::to_string(x.size()));
    }
    check_delta(spec, x.size());
    switch (spec.kind) {
        case LagrangianKind::ReluSquared:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
            return;
        case LagrangianKind::GeluPrimitive:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu(x[i]);
            return;
        case LagrangianKind::CenteredNorm: {
            const double m = mean_of(x);
            const double denom_sq = centered_sq_sum(x, m) + spec.eps;
            if (denom_sq <= 0.0) {
                throw NumericError(
                    "centered_norm activation: singular at a constant input with eps == 0");
            }
            const double inv = 1.0 / std::sqrt(denom_sq);
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) * inv;
            return;
        }
        case LagrangianKind::LayerNorm: {
            const double m = mean_of(x);
            const double denom_sq = centered_sq_sum(x, m) / spec.scale_dim + spec.eps;
            if (denom_sq <= 0.0) {
                throw NumericError(
                    "layer_norm activation: singular at a constant input with eps == 0");
            }
            const double inv = spec.gamma / std::sqrt(denom_sq);
            for (std::size_t i = 0; i < x.size(); ++i) {
                out[i] = (x[i] - m) * inv + (spec.delta.empty() ? 0.0 : spec.delta[i]);
            }
            return;
        }
    }
    throw ConfigError("lagrangian_activation: unknown kind");
}

Vector lagrangian_activation(const LagrangianSpec& spec, std::span<const double> x) {
    Vector out(x.size());
    lagrangian_activation(spec, x, out);
    return out;
}

Matrix2D lagrangian_hessian(const LagrangianSpec& spec, std::span<const double> x) {
    const std::size_t n = x.size();
    check_delta(spec, n);
    Matrix2D h(n, n);
    switch (spec.kind) {
        case LagrangianKind::ReluSquared:
            // Piecewise quadratic; second derivative at exactly 0 is taken as 0.
            for (std::size_t i = 0; i < n; ++i) h(i, i) = x[i] > 0.0 ? 1.0 : 0.0;
            return h;
        case LagrangianKind::GeluPrimitive:
            for (std::size_t i = 0; i < n; ++i) h(i, i) = gelu_prime(x[i]);
            return h;
        case LagrangianKind::CenteredNorm:
        case LagrangianKind::LayerNorm: {
            // Both norms share the form
            //   H_ij = gamma * [ r (delta_ij - 1/n) - r^3 (x_i - m)(x_j - m) / D ]
            // with r = 1/sqrt(S/D + eps); CenteredNorm is gamma = D = 1.
            const bool ln = spec.kind == LagrangianKind::LayerNorm;
            const double gamma = ln ? spec.gamma : 1.0;
            const double D = ln ? spec.scale_dim : 1.0;
            const double m = mean_of(x);
            const double denom_sq = centered_sq_sum(x, m) / D + spec.eps;
            if (denom_sq <= 0.0) {
                throw NumericError("norm hessian: singular at a constant input with eps == 0");
            }
            const double r = 1.0 / std::sqrt(denom_sq);
            const double r3 = r * r * r / D;
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double kron = i == j ? 1.0 : 0.0;
                    h(i, j) = gamma * (r * (kron - inv_n) - r3 * (x[i] - m) * (x[j] - m));
                }
            }
            return h;
        }
    }
    throw ConfigError("lagrangian_hessian: unknown kind");
}

void lagrangian_hessian_apply(const LagrangianSpec& spec, std::span<const double> x,
                              std::span<const double> g, std::span<double> out) {
    const std::size_t n = x.size();
    if (g.size() != n || out.size() != n) {
        throw DimensionError("lagrangian_hessian_apply: length mismatch");
    }
    switch (spec.kind) {
        case LagrangianKind::ReluSquared:
            for (std::size_t i = 0; i < n; ++i)
                if (x[i] > 0.0) out[i] += g[i];
            return;
        case LagrangianKind::GeluPrimitive:
            for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * gelu_prime(x[i]);
            return;
        case LagrangianKind::CenteredNorm:
        case LagrangianKind::LayerNorm: {
            // H g = gamma * [ r (g - mean(g)) - (r^3/D) (x - m) <g, x - m> ]
            const bool ln = spec.kind == LagrangianKind::LayerNorm;
            const double gamma = ln ? spec.gamma : 1.0;
            const double D = ln ? spec.scale_dim : 1.0;
            const double m = mean_of(x);
            const double denom_sq = centered_sq_sum(x, m) / D + spec.eps;
            if (denom_sq <= 0.0) {
                throw NumericError(
                    "norm hessian apply: singular at a constant input with eps == 0");
            }
            const double r = 1.0 / std::sqrt(denom_sq);
            const double r3 = r * r * r / D;
            double g_mean = 0.0, proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                g_mean += g[i];
                proj += g[i] * (x[i] - m);
            }
            g_mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] += gamma * (r * (g[i] - g_mean) - r3 * (x[i] - m) * proj);
            }
            return;
        }
    }
    throw ConfigError("lagrangian_hessian_apply: unknown kind");
}

}  // namespace hopmix
