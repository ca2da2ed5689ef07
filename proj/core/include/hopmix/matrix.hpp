#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hopmix/errors.hpp"

namespace hopmix {

// All state vectors are plain double buffers; shapes are checked by the
// operations that consume them.
using Vector = std::vector<double>;

// Dense row-major matrix, double precision. Row-major layout is part of the
// checkpoint file contract, do not change it.
class Matrix2D {
public:
    Matrix2D() = default;
    Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix2D identity(std::size_t n);
    static Matrix2D from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    void fill(double v);
    bool same_shape(const Matrix2D& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix2D& operator+=(const Matrix2D& other);
    Matrix2D& operator-=(const Matrix2D& other);
    Matrix2D& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_str(const Matrix2D& m);

Matrix2D operator+(Matrix2D a, const Matrix2D& b);
Matrix2D operator-(Matrix2D a, const Matrix2D& b);
Matrix2D operator*(Matrix2D a, double s);
Matrix2D operator*(double s, Matrix2D a);

// Standard product; throws DimensionError naming both shapes on mismatch.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);
// a^T * b without materializing the transpose.
Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b);
// a * b^T without materializing the transpose.
Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b);

Matrix2D transpose(const Matrix2D& m);

double frobenius_norm_sq(const Matrix2D& m);
double dot(const Matrix2D& a, const Matrix2D& b);
double dot(std::span<const double> a, std::span<const double> b);

double max_abs(const Matrix2D& m);
double max_abs_diff(const Matrix2D& a, const Matrix2D& b);
bool all_finite(const Matrix2D& m);
bool all_finite(std::span<const double> x);

// y = M x for a vector x (x.size() == M.cols()).
Vector matvec(const Matrix2D& m, std::span<const double> x);

}  // namespace hopmix
