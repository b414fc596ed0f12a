#ifndef KCL_MATRIX_HPP
#define KCL_MATRIX_HPP

#include <cstddef>
#include <vector>

#include "kcl/errors.hpp"

namespace kcl {

/// Dense row-major matrix of doubles. Just enough linear algebra for a
/// small MLP; no views, no expression templates.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// out = a * b^T, where a is m-by-k and b is n-by-k. This is the natural
/// shape for a forward pass with out-by-in weight matrices.
inline Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("multiply_transposed: inner dimensions differ");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += arow[k] * brow[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

/// out = a * b, plain row-major product; a is m-by-k, b is k-by-n.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("multiply: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

}  // namespace kcl

#endif  // KCL_MATRIX_HPP
