#pragma once

// Dense row-major linear algebra with hand-coded backward rules.
//
// Everything is 64-bit float. Matrix is the sole 2-D carrier; BatchTensor3
// adds a leading batch axis for the attention path. Gradients are written
// analytically per primitive (no tape); each backward is checked against
// central finite differences in the test suite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "imlp/common.hpp"

namespace imlp {

using Vector = std::vector<double>;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, data.size() == rows * cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw shape_error("Matrix: data length " + std::to_string(data.size()) + " != " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

struct BatchTensor3 {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::size_t dim = 0;
    std::vector<double> data;  // [b][s][d] row-major

    BatchTensor3() = default;
    BatchTensor3(std::size_t b, std::size_t s, std::size_t d, double fill = 0.0)
        : batch(b), seq(s), dim(d), data(b * s * d, fill) {}

    double& operator()(std::size_t b, std::size_t s, std::size_t d) { return data[(b * seq + s) * dim + d]; }
    double operator()(std::size_t b, std::size_t s, std::size_t d) const { return data[(b * seq + s) * dim + d]; }

    double* slice(std::size_t b) { return data.data() + b * seq * dim; }
    const double* slice(std::size_t b) const { return data.data() + b * seq * dim; }

    std::string shape_str() const {
        return std::to_string(batch) + "x" + std::to_string(seq) + "x" + std::to_string(dim);
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw shape_error("matmul: inner dimensions differ, " + a.shape_str() + " * " + b.shape_str());
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

/// d(a*b) w.r.t. a and b given upstream dC. da = dC * b^T, db = a^T * dC.
inline std::pair<Matrix, Matrix> matmul_backward(const Matrix& a, const Matrix& b, const Matrix& upstream) {
    if (upstream.rows != a.rows || upstream.cols != b.cols)
        throw shape_error("matmul_backward: upstream " + upstream.shape_str() + " does not match product shape");
    Matrix da(a.rows, a.cols);
    Matrix db(b.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double* brow = b.row(k);
            const double* urow = upstream.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < b.cols; ++j) acc += urow[j] * brow[j];
            da(i, k) = acc;
        }
    }
    for (std::size_t k = 0; k < a.cols; ++k) {
        for (std::size_t i = 0; i < a.rows; ++i) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* urow = upstream.row(i);
            double* dbrow = db.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) dbrow[j] += aik * urow[j];
        }
    }
    return {std::move(da), std::move(db)};
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

/// Independent matrix product per batch index: out[b] = a[b] * b3[b].
inline BatchTensor3 batched_matmul(const BatchTensor3& a, const BatchTensor3& b) {
    if (a.batch != b.batch)
        throw shape_error("batched_matmul: batch sizes differ, " + a.shape_str() + " vs " + b.shape_str());
    if (a.dim != b.seq)
        throw shape_error("batched_matmul: inner dimensions differ, " + a.shape_str() + " * " + b.shape_str());
    BatchTensor3 out(a.batch, a.seq, b.dim);
    for (std::size_t n = 0; n < a.batch; ++n) {
        const double* as = a.slice(n);
        const double* bs = b.slice(n);
        double* os = out.slice(n);
        for (std::size_t i = 0; i < a.seq; ++i) {
            for (std::size_t k = 0; k < a.dim; ++k) {
                const double aik = as[i * a.dim + k];
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.dim; ++j) os[i * b.dim + j] += aik * bs[k * b.dim + j];
            }
        }
    }
    return out;
}

/// Backward of batched_matmul, slice by slice.
inline std::pair<BatchTensor3, BatchTensor3> batched_matmul_backward(const BatchTensor3& a, const BatchTensor3& b,
                                                                     const BatchTensor3& upstream) {
    if (upstream.batch != a.batch || upstream.seq != a.seq || upstream.dim != b.dim)
        throw shape_error("batched_matmul_backward: upstream " + upstream.shape_str() + " does not match product");
    BatchTensor3 da(a.batch, a.seq, a.dim);
    BatchTensor3 db(b.batch, b.seq, b.dim);
    for (std::size_t n = 0; n < a.batch; ++n) {
        const double* as = a.slice(n);
        const double* bs = b.slice(n);
        const double* us = upstream.slice(n);
        double* das = da.slice(n);
        double* dbs = db.slice(n);
        for (std::size_t i = 0; i < a.seq; ++i) {
            for (std::size_t k = 0; k < a.dim; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < b.dim; ++j) acc += us[i * b.dim + j] * bs[k * b.dim + j];
                das[i * a.dim + k] = acc;
            }
        }
        for (std::size_t k = 0; k < a.dim; ++k) {
            for (std::size_t i = 0; i < a.seq; ++i) {
                const double aik = as[i * a.dim + k];
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.dim; ++j) dbs[k * b.dim + j] += aik * us[i * b.dim + j];
            }
        }
    }
    return {std::move(da), std::move(db)};
}

/// Per-slice right-multiplication by a shared matrix: out[b] = a[b] * m.
inline BatchTensor3 batched_matmul_shared(const BatchTensor3& a, const Matrix& m) {
    if (a.dim != m.rows)
        throw shape_error("batched_matmul_shared: inner dimensions differ, " + a.shape_str() + " * " + m.shape_str());
    BatchTensor3 out(a.batch, a.seq, m.cols);
    for (std::size_t n = 0; n < a.batch; ++n) {
        const double* as = a.slice(n);
        double* os = out.slice(n);
        for (std::size_t i = 0; i < a.seq; ++i) {
            for (std::size_t k = 0; k < a.dim; ++k) {
                const double aik = as[i * a.dim + k];
                if (aik == 0.0) continue;
                const double* mrow = m.row(k);
                for (std::size_t j = 0; j < m.cols; ++j) os[i * m.cols + j] += aik * mrow[j];
            }
        }
    }
    return out;
}

/// Row-wise softmax with per-row max subtraction.
inline Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* in = x.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < x.cols; ++j) o[j] *= inv;
    }
    return out;
}

/// Softmax backward from the forward output y: dx = y .* (dy - sum(dy .* y)).
inline Matrix softmax_rows_backward(const Matrix& y, const Matrix& upstream) {
    if (!y.same_shape(upstream))
        throw shape_error("softmax_rows_backward: shapes differ, " + y.shape_str() + " vs " + upstream.shape_str());
    Matrix dx(y.rows, y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
        const double* yr = y.row(i);
        const double* ur = upstream.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) dot += ur[j] * yr[j];
        double* dr = dx.row(i);
        for (std::size_t j = 0; j < y.cols; ++j) dr[j] = yr[j] * (ur[j] - dot);
    }
    return dx;
}

inline Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Passes upstream where the pre-activation was positive, zero elsewhere.
inline Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
    if (!x.same_shape(upstream))
        throw shape_error("relu_backward: shapes differ, " + x.shape_str() + " vs " + upstream.shape_str());
    Matrix dx(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? upstream.data[i] : 0.0;
    return dx;
}

inline double l2_norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// v / (||v||_2 + eps). Zero vectors map to zero vectors.
inline Vector l2_normalize(const Vector& v, double eps = 1e-8) {
    if (eps <= 0.0) throw numeric_error("l2_normalize: eps must be positive");
    const double scale = 1.0 / (l2_norm(v) + eps);
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
    return out;
}

/// Backward of v -> v/(||v||+eps):  J = I/(n+eps) - v v^T / (||v|| (n+eps)^2), n = ||v||.
inline Vector l2_normalize_backward(const Vector& v, const Vector& upstream, double eps = 1e-8) {
    if (v.size() != upstream.size()) throw shape_error("l2_normalize_backward: size mismatch");
    const double n = l2_norm(v);
    const double denom = n + eps;
    Vector out(v.size());
    if (n == 0.0) {
        // At exactly zero the map is v/eps to first order.
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = upstream[i] / denom;
        return out;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += upstream[i] * v[i];
    const double coef = dot / (n * denom * denom);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = upstream[i] / denom - v[i] * coef;
    return out;
}

inline bool all_finite(const Matrix& m) {
    return std::all_of(m.data.begin(), m.data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace imlp
