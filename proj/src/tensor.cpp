#include "inclass/tensor.hpp"

#include <cmath>
#include <string>

namespace inclass {

Tensor2 Tensor2::gather_rows(std::span<const std::size_t> index) const {
    Tensor2 out(index.size(), cols_);
    for (std::size_t i = 0; i < index.size(); ++i) {
        const double* src = row_ptr(index[i]);
        double* dst = out.row_ptr(i);
        for (std::size_t c = 0; c < cols_; ++c) dst[c] = src[c];
    }
    return out;
}

std::vector<double> Tensor2::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
}

std::vector<double> Tensor2::column_means() const {
    std::vector<double> mean(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const double* p = row_ptr(r);
        for (std::size_t c = 0; c < cols_; ++c) mean[c] += p[c];
    }
    const double inv = rows_ > 0 ? 1.0 / static_cast<double>(rows_) : 0.0;
    for (double& m : mean) m *= inv;
    return mean;
}

void Tensor2::check_finite(const char* what) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw numeric_error(std::string(what) + ": non-finite entry at flat index " +
                                std::to_string(i));
        }
    }
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.cols() != b.cols())
        throw dimension_error("matmul_nt: inner dimensions differ");
    const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
    out = Tensor2(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row_ptr(i);
        double* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.row_ptr(j);
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            oi[j] = acc;
        }
    }
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.rows() != b.rows())
        throw dimension_error("matmul_tn: inner dimensions differ");
    const std::size_t n = a.cols(), m = b.cols(), k = a.rows();
    out = Tensor2(n, m);
    // Accumulate rank-1 updates; walks both inputs row-major.
    for (std::size_t t = 0; t < k; ++t) {
        const double* at = a.row_ptr(t);
        const double* bt = b.row_ptr(t);
        for (std::size_t i = 0; i < n; ++i) {
            double* oi = out.row_ptr(i);
            const double av = at[i];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) oi[j] += av * bt[j];
        }
    }
}

void matmul_nn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.cols() != b.rows())
        throw dimension_error("matmul_nn: inner dimensions differ");
    const std::size_t n = a.rows(), m = b.cols(), k = a.cols();
    out = Tensor2(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row_ptr(i);
        double* oi = out.row_ptr(i);
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            if (av == 0.0) continue;
            const double* bt = b.row_ptr(t);
            for (std::size_t j = 0; j < m; ++j) oi[j] += av * bt[j];
        }
    }
}

} // namespace inclass
