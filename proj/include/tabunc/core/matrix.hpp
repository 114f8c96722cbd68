#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabunc/core/error.hpp"

namespace tabunc {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMajor>;
using EigenConstMap = Eigen::Map<const EigenRowMajor>;

// Dense row-major matrix of doubles. Products go through Eigen maps.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                                 shape_string(rows_, cols_));
        }
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionError("ragged initializer for Matrix");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix column(std::span<const double> values) {
        return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const double& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    const double& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    EigenMap eigen() noexcept { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
    EigenConstMap eigen() const noexcept { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void set_zero() { fill(0.0); }

    Matrix& operator+=(const Matrix& other) {
        require_same_shape(*this, other, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    double squared_norm() const noexcept {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return s;
    }

    std::string shape() const { return shape_string(rows_, cols_); }

    static std::string shape_string(std::size_t r, std::size_t c) {
        return "[" + std::to_string(r) + " x " + std::to_string(c) + "]";
    }

    static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
            throw DimensionError(std::string("shape mismatch in ") + op + ": " + a.shape() + " vs " + b.shape());
        }
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape() + " * " + b.shape());
    }
    Matrix out(a.rows(), b.cols());
    if (!out.empty() && a.cols() > 0) out.eigen().noalias() = a.eigen() * b.eigen();
    return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn shape mismatch: " + a.shape() + "^T * " + b.shape());
    }
    Matrix out(a.cols(), b.cols());
    if (!out.empty() && a.rows() > 0) out.eigen().noalias() = a.eigen().transpose() * b.eigen();
    return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt shape mismatch: " + a.shape() + " * " + b.shape() + "^T");
    }
    Matrix out(a.rows(), b.rows());
    if (!out.empty() && a.cols() > 0) out.eigen().noalias() = a.eigen() * b.eigen().transpose();
    return out;
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

inline Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("hconcat row mismatch: " + a.shape() + " | " + b.shape());
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
        std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + std::ptrdiff_t(a.cols()));
    }
    return out;
}

inline Matrix vconcat(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("vconcat column mismatch: " + a.shape() + " / " + b.shape());
    }
    std::vector<double> data = a.data();
    data.insert(data.end(), b.data().begin(), b.data().end());
    return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

inline std::vector<double> column_of(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
    return out;
}

} // namespace tabunc
