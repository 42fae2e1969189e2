/// @file  linalg.hpp
/// @brief Small dense helpers: row-major matrices and Householder least squares.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "error.hpp"

namespace tripcast::linalg {

struct Matrix {
    std::size_t rows{0};
    std::size_t cols{0};
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Least-squares solution of min ||A b - y||. Throws NumericalError when A is
/// rank deficient (relative pivot below 1e-12).
inline std::vector<double> least_squares(Matrix a, std::vector<double> y) {
    const std::size_t m = a.rows;
    const std::size_t n = a.cols;
    if (y.size() != m) throw DataError("least_squares: dimension mismatch");
    if (m < n) throw NumericalError("least_squares: fewer equations than unknowns");
    double scale = 0.0;
    for (double v : a.data) scale = std::max(scale, std::abs(v));
    std::vector<double> diag(n);
    for (std::size_t k = 0; k < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i) norm += a(i, k) * a(i, k);
        norm = std::sqrt(norm);
        if (norm <= 1e-12 * std::max(scale, 1.0) * std::sqrt(static_cast<double>(m))) {
            throw NumericalError("least_squares: rank-deficient design matrix");
        }
        const double alpha = a(k, k) > 0 ? -norm : norm;
        // v = x - alpha e1 stored in column k
        a(k, k) -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < m; ++i) vnorm2 += a(i, k) * a(i, k);
        for (std::size_t j = k + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < m; ++i) dot += a(i, k) * a(i, j);
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < m; ++i) a(i, j) -= f * a(i, k);
        }
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i) dot += a(i, k) * y[i];
        const double f = 2.0 * dot / vnorm2;
        for (std::size_t i = k; i < m; ++i) y[i] -= f * a(i, k);
        diag[k] = alpha;
    }
    std::vector<double> b(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = y[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * b[j];
        b[k] = s / diag[k];
    }
    return b;
}

/// Numerical rank of a symmetric positive semidefinite matrix via pivoted Cholesky.
inline std::size_t psd_rank(Matrix g, double rel_tol = 1e-10) {
    const std::size_t n = g.rows;
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i) top = std::max(top, g(i, i));
    if (top <= 0.0) return 0;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::size_t rank = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (g(perm[i], perm[i]) > g(perm[best], perm[best])) best = i;
        }
        std::swap(perm[k], perm[best]);
        const auto p = perm[k];
        const double pivot = g(p, p);
        if (pivot <= rel_tol * top) break;
        ++rank;
        const double root = std::sqrt(pivot);
        for (std::size_t i = k + 1; i < n; ++i) g(perm[i], p) /= root;
        for (std::size_t i = k + 1; i < n; ++i) {
            for (std::size_t j = k + 1; j < n; ++j) {
                g(perm[i], perm[j]) -= g(perm[i], p) * g(perm[j], p);
            }
        }
    }
    return rank;
}

}  // namespace tripcast::linalg
