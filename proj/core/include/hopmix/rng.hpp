#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hopmix/matrix.hpp"

namespace hopmix {

// Deterministic generator: mt19937_64 (the raw stream is pinned by the C++
// standard, so equal seeds give equal streams on every platform). The
// uniform/normal transforms below are written out by hand instead of using
// std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n);

    // Standard normal, Marsaglia polar method.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Vector normal_vector(std::size_t n, double stddev = 1.0);
    Matrix2D normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);
    Matrix2D uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

    // Fisher-Yates with the unbiased index draw above.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hopmix
