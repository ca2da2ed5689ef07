#include "hopmix/rng.hpp"

#include <cmath>

namespace hopmix {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    has_spare_ = true;
    return u * r;
}

Vector Rng::normal_vector(std::size_t n, double stddev) {
    Vector x(n);
    for (auto& v : x) v = stddev * normal();
    return x;
}

Matrix2D Rng::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
    Matrix2D m(rows, cols);
    for (auto& v : m.storage()) v = stddev * normal();
    return m;
}

Matrix2D Rng::uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix2D m(rows, cols);
    for (auto& v : m.storage()) v = uniform(lo, hi);
    return m;
}

}  // namespace hopmix
