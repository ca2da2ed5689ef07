#pragma once

#include <cmath>
#include <utility>

#include "hopmix/errors.hpp"
#include "hopmix/matrix.hpp"

namespace hopmix {

// Central differences, (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// h = 1e-5 balances truncation against round-off for f64.
template <typename F>
Vector finite_diff_grad(F&& f, Vector x, double h = 1e-5) {
    if (h <= 0.0) throw NumericError("finite_diff_grad: step size must be positive");
    Vector grad(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Same scheme for a scalar function of a matrix argument.
template <typename F>
Matrix2D finite_diff_grad_matrix(F&& f, Matrix2D x, double h = 1e-5) {
    if (h <= 0.0) throw NumericError("finite_diff_grad_matrix: step size must be positive");
    Matrix2D grad(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x.flat()[i];
        x.flat()[i] = xi + h;
        const double fp = f(x);
        x.flat()[i] = xi - h;
        const double fm = f(x);
        x.flat()[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad_matrix: non-finite function value at entry " +
                               std::to_string(i));
        }
        grad.flat()[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace hopmix
