// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seedline/error.hpp"

namespace seedline::num {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major tensor of doubles. Storage supports any rank; the
/// arithmetic in this library works on rank-2 tensors (vectors are 1 x n).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        data_.assign(count(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw Error(Errc::ShapeMismatch, "shape " + shape_str(shape_) + " holds " +
                                                 std::to_string(count(shape_)) + " values, got " +
                                                 std::to_string(data_.size()));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }

    static Tensor from_rows(const std::vector<std::vector<double>>& rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.front().size() : 0;
        Tensor t = matrix(r, c);
        for (std::size_t i = 0; i < r; ++i) {
            if (rows[i].size() != c) throw Error(Errc::ShapeMismatch, "ragged rows");
            std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
        }
        return t;
    }

    static Tensor row_vector(std::span<const double> v) {
        return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
    }

    static Tensor identity(std::size_t n) {
        Tensor t = matrix(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    static std::size_t count(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
    [[nodiscard]] std::size_t cols() const { return rank() == 2 ? shape_[1] : size(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols(), cols());
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    void require_finite(std::string_view what) const {
        if (!all_finite()) throw Error(Errc::NonFinite, std::string(what) + " contains NaN or Inf");
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

inline void require_matrix(const Tensor& t, std::string_view what) {
    if (t.rank() != 2) throw Error(Errc::ShapeMismatch, std::string(what) + " expects a matrix, got " + shape_str(t.shape()));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what) {
    if (a.shape() != b.shape())
        throw Error(Errc::ShapeMismatch,
                    std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Kernels. Shared by the differentiable graph and by the inference fast paths.
// ---------------------------------------------------------------------------

/// C += A * B
inline void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C += A * B^T   (A: m x n, B: k x n, C: m x k)
inline void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = pb + p * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
            pc[i * k + p] += s;
        }
    }
}

/// C += A^T * B   (A: m x k, B: m x n, C: k x n)
inline void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* brow = pb + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            double* crow = pc + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows())
        throw Error(Errc::ShapeMismatch, "matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor c = Tensor::matrix(a.rows(), b.cols());
    gemm_acc(a, b, c);
    return c;
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

template <class F>
Tensor map(const Tensor& t, F&& f) {
    Tensor out(t.shape());
    std::transform(t.data().begin(), t.data().end(), out.data().begin(), f);
    return out;
}

inline Tensor sigmoid(const Tensor& t) { return map(t, [](double v) { return sigmoid(v); }); }
inline Tensor tanh(const Tensor& t) { return map(t, [](double v) { return std::tanh(v); }); }

/// Row-wise softmax of logits / temperature.
inline Tensor softmax(const Tensor& t, double temperature = 1.0) {
    require_matrix(t, "softmax");
    Tensor out(t.shape());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        auto in = t.row(r);
        auto o = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp((in[j] - mx) / temperature);
            z += o[j];
        }
        for (double& v : o) v /= z;
    }
    return out;
}

/// Row-wise log-softmax (numerically stable).
inline Tensor log_softmax(const Tensor& t) {
    require_matrix(t, "log_softmax");
    Tensor out(t.shape());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        auto in = t.row(r);
        auto o = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (double v : in) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - lse;
    }
    return out;
}

/// a + b where b is either the same shape as a or a 1 x n row broadcast over a's rows.
inline Tensor add_broadcast(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i];
        return out;
    }
    require_matrix(a, "add");
    if (b.rows() != 1 || b.cols() != a.cols())
        throw Error(Errc::ShapeMismatch, "add " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto o = out.row(r);
        for (std::size_t j = 0; j < o.size(); ++j) o[j] += b[j];
    }
    return out;
}

inline Tensor concat_cols(std::span<const Tensor* const> parts) {
    const std::size_t rows = parts.front()->rows();
    std::size_t cols = 0;
    for (const Tensor* p : parts) {
        if (p->rows() != rows) throw Error(Errc::ShapeMismatch, "concat_cols row count");
        cols += p->cols();
    }
    Tensor out = Tensor::matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto o = out.row(r).begin();
        for (const Tensor* p : parts) o = std::copy(p->row(r).begin(), p->row(r).end(), o);
    }
    return out;
}

inline double l2_norm_sq(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return s;
}

inline std::size_t argmax(std::span<const double> v) {
    // Lowest index wins ties.
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Shannon entropy in nats.
inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

} // namespace seedline::num
