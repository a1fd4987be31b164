#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nplb/error.hpp"
#include "nplb/matrix.hpp"

namespace nplb {

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("euclidean_distance: lengths " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws FactorizationError if a pivot is not strictly positive.
inline Matrix cholesky(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("cholesky: matrix not square");
    const size_t n = m.rows();
    Matrix l(n, n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0)) throw FactorizationError("matrix is not positive-definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

// Solves L L^T x = b given the lower-triangular factor L.
inline std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
    const size_t n = l.rows();
    if (b.size() != n) throw DimensionError("cholesky_solve: rhs length mismatch");
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    std::vector<double> x(n);
    for (size_t i = n; i-- > 0;) {
        double s = y[i];
        for (size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

// sqrt((x-mu)^T cov^-1 (x-mu)), computed via a Cholesky solve.
inline double mahalanobis_distance(std::span<const double> x, std::span<const double> mu, const Matrix& cov) {
    if (x.size() != mu.size() || cov.rows() != x.size() || cov.cols() != x.size()) {
        throw DimensionError("mahalanobis_distance: shape mismatch");
    }
    std::vector<double> diff(x.size());
    for (size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - mu[i];
    const Matrix l = cholesky(cov);
    const std::vector<double> solved = cholesky_solve(l, diff);
    double s = 0.0;
    for (size_t i = 0; i < diff.size(); ++i) s += diff[i] * solved[i];
    // Quadratic form is >= 0 for SPD cov; clamp rounding noise.
    return std::sqrt(std::max(s, 0.0));
}

// sim(x, y) = 1 / (1 + d); in (0, 1], equal to 1 iff d == 0.
inline double similarity_from_distance(double d) { return 1.0 / (1.0 + d); }

}  // namespace nplb
