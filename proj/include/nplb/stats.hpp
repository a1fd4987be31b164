#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nplb/error.hpp"
#include "nplb/matrix.hpp"

namespace nplb {

inline double mean(std::span<const double> values) {
    if (values.empty()) throw ValueError("mean of empty vector");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

// Sample standard deviation (n-1 denominator); n == 1 gives 0.
inline double stddev(std::span<const double> values) {
    if (values.empty()) throw ValueError("stddev of empty vector");
    if (values.size() == 1) return 0.0;
    double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

// Linear-interpolation quantile at position (q/100)*(n-1) of the sorted values.
inline double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw ValueError("percentile of empty vector");
    if (!(q >= 0.0 && q <= 100.0)) throw ValueError("percentile q=" + std::to_string(q) + " outside [0,100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Coordinate-wise percentile, one value per column.
inline std::vector<double> columnwise_percentile(const Matrix& m, double q) {
    if (m.rows() == 0 || m.cols() == 0) throw ValueError("columnwise_percentile of empty matrix");
    std::vector<double> out(m.cols());
    for (size_t c = 0; c < m.cols(); ++c) out[c] = percentile(m.column(c), q);
    return out;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
    if (x.size() < 2) throw ValueError("pearson: need at least 2 points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ValueError("pearson: correlation undefined for constant vector");
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks (1-based), ties broken by mean rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const size_t n = values.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Inverse standard-normal CDF (Acklam's rational approximation, ~1e-9 abs error).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValueError("inverse_normal_cdf: p outside (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double q, r;
    if (p < p_low) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        q = p - 0.5;
        r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Rank-based inverse-normal transform: value at average rank r maps to
// Phi^-1((r - 0.5) / n). Preserves rank order and is idempotent.
inline std::vector<double> inverse_normal_transform(std::span<const double> values) {
    const auto ranks = average_ranks(values);
    const double n = static_cast<double>(values.size());
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i) out[i] = inverse_normal_cdf((ranks[i] - 0.5) / n);
    return out;
}

}  // namespace nplb
