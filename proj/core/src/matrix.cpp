#include "hopmix/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace hopmix {

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix2D: data length " + std::to_string(data_.size()) +
                             " does not match shape (" + std::to_string(rows_) + "x" +
                             std::to_string(cols_) + ")");
    }
}

Matrix2D Matrix2D::identity(std::size_t n) {
    Matrix2D m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix2D Matrix2D::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix2D m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) {
            throw DimensionError("Matrix2D::from_rows: ragged row " + std::to_string(i));
        }
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

void Matrix2D::fill(double v) {
    for (auto& x : data_) x = v;
}

std::string shape_str(const Matrix2D& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

namespace {

void require_same_shape(const Matrix2D& a, const Matrix2D& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
    }
}

}  // namespace

Matrix2D& Matrix2D::operator+=(const Matrix2D& other) {
    require_same_shape(*this, other, "Matrix2D::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix2D& Matrix2D::operator-=(const Matrix2D& other) {
    require_same_shape(*this, other, "Matrix2D::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix2D& Matrix2D::operator*=(double s) {
    for (auto& x : data_) x *= s;
    return *this;
}

Matrix2D operator+(Matrix2D a, const Matrix2D& b) { return a += b; }
Matrix2D operator-(Matrix2D a, const Matrix2D& b) { return a -= b; }
Matrix2D operator*(Matrix2D a, double s) { return a *= s; }
Matrix2D operator*(double s, Matrix2D a) { return a *= s; }

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a) + " * " +
                             shape_str(b));
    }
    Matrix2D out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = out.data() + i * m;
        const double* a_row = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            if (av == 0.0) continue;
            const double* b_row = b.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: a^T*b dimensions differ, " + shape_str(a) + "^T * " +
                             shape_str(b));
    }
    Matrix2D out(a.cols(), b.cols());
    const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = a.data() + p * n;
        const double* b_row = b.data() + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = a_row[i];
            if (av == 0.0) continue;
            double* out_row = out.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: a*b^T dimensions differ, " + shape_str(a) + " * " +
                             shape_str(b) + "^T");
    }
    Matrix2D out(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* a_row = a.data() + i * k;
        double* out_row = out.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double* b_row = b.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a_row[p] * b_row[p];
            out_row[j] = s;
        }
    }
    return out;
}

Matrix2D transpose(const Matrix2D& m) {
    Matrix2D out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

double frobenius_norm_sq(const Matrix2D& m) {
    double s = 0.0;
    for (double x : m.flat()) s += x * x;
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double dot(const Matrix2D& a, const Matrix2D& b) {
    require_same_shape(a, b, "dot");
    return dot(a.flat(), b.flat());
}

double max_abs(const Matrix2D& m) {
    double v = 0.0;
    for (double x : m.flat()) v = std::max(v, std::abs(x));
    return v;
}

double max_abs_diff(const Matrix2D& a, const Matrix2D& b) {
    require_same_shape(a, b, "max_abs_diff");
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        v = std::max(v, std::abs(a.flat()[i] - b.flat()[i]));
    return v;
}

bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Matrix2D& m) { return all_finite(m.flat()); }

Vector matvec(const Matrix2D& m, std::span<const double> x) {
    if (x.size() != m.cols()) {
        throw DimensionError("matvec: " + shape_str(m) + " * vector of length " +
                             std::to_string(x.size()));
    }
    Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.data() + i * m.cols();
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

}  // namespace hopmix
