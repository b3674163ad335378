#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rssmlp/error.hpp"

namespace rssmlp {

// Dense row-major matrix of doubles. Deliberately minimal: storage, shape
// checks and the handful of products the rest of the library needs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) {
            throw ContractViolation("Matrix: data length does not match shape");
        }
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row_span(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row_span(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

namespace detail {
using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

inline ConstMap map_of(const Matrix& m) {
    return ConstMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                    static_cast<Eigen::Index>(m.cols));
}
inline MutMap map_of(Matrix& m) {
    return MutMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                  static_cast<Eigen::Index>(m.cols));
}
}  // namespace detail

inline void check_finite(const Matrix& m, const char* what) {
    for (double v : m.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite entry");
        }
    }
}

// a (r x k) times b (k x c).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ContractViolation("matmul: inner dimensions " + std::to_string(a.cols) +
                                " and " + std::to_string(b.rows) + " differ");
    }
    Matrix out(a.rows, b.cols);
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b);
    check_finite(out, "matmul");
    return out;
}

// transpose(a) times b; a is (k x r), b is (k x c).
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
        throw ContractViolation("matmul_transpose_a: row counts differ");
    }
    Matrix out(a.cols, b.cols);
    detail::map_of(out).noalias() = detail::map_of(a).transpose() * detail::map_of(b);
    check_finite(out, "matmul_transpose_a");
    return out;
}

// a times transpose(b); a is (r x k), b is (c x k).
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) {
        throw ContractViolation("matmul_transpose_b: column counts differ");
    }
    Matrix out(a.rows, b.rows);
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b).transpose();
    check_finite(out, "matmul_transpose_b");
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    }
    return out;
}

// Pairwise (cascade) summation: error grows O(log n) instead of O(n), and the
// result is a fixed function of the input order, independent of threading.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw ContractViolation("mean_of: empty input");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace rssmlp
