#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nplb/error.hpp"

namespace nplb {

// Dense row-major matrix of doubles; the universal numeric carrier.
// Entries must be finite on construction (validate() enforces it).
class Matrix {
public:
    Matrix() = default;

    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(size_t rows, size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                                 " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
        validate();
    }

    static Matrix identity(size_t n) {
        Matrix m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> column(size_t c) const {
        std::vector<double> out(rows_);
        for (size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
        return out;
    }

    void set_row(size_t r, std::span<const double> values) {
        if (values.size() != cols_) throw DimensionError("row length mismatch");
        for (size_t c = 0; c < cols_; ++c) data_[r * cols_ + c] = values[c];
    }

    void validate() const {
        for (double v : data_) {
            if (!std::isfinite(v)) throw ValueError("matrix entry is not finite");
        }
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& other) const = default;

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

// y = M x
inline std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    if (x.size() != m.cols()) throw DimensionError("matvec: vector length != matrix cols");
    std::vector<double> y(m.rows(), 0.0);
    for (size_t r = 0; r < m.rows(); ++r) {
        double acc = 0.0;
        for (size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

}  // namespace nplb
