#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "inclass/errors.hpp"

namespace inclass {

/// Dense row-major matrix of doubles. The single numeric container used for
/// network parameters, activations and data batches.
class Tensor2 {
public:
    Tensor2() : rows_(0), cols_(0) {}
    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw dimension_error("Tensor2: data length does not match rows*cols");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    std::span<double> row(std::size_t r) { return {row_ptr(r), cols_}; }
    std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    /// Extracts the rows listed in `index` into a new matrix, in order.
    Tensor2 gather_rows(std::span<const std::size_t> index) const;

    /// Column `c` as a vector.
    std::vector<double> column(std::size_t c) const;

    /// Column-wise means (length cols).
    std::vector<double> column_means() const;

    /// Throws numeric_error if any entry is NaN or infinite.
    void check_finite(const char* what) const;

    bool operator==(const Tensor2& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

/// C = A * B^T where A is n×k and B is m×k. Result n×m, accumulated into
/// zero-initialised output.
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out);

/// C = A^T * B where A is k×n and B is k×m. Result n×m.
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out);

/// C = A * B where A is n×k and B is k×m.
void matmul_nn(const Tensor2& a, const Tensor2& b, Tensor2& out);

} // namespace inclass
