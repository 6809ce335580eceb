#pragma once

// Numeric kernels shared by every module. Each kernel computes every output
// element with a fixed operation order, so results are bit-identical for any
// thread count; OpenMP only distributes whole output rows. A serial naive
// matmul (matmul_ref) is kept as the reference implementation for tests.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "eagle/tensor.hpp"

namespace eagle {

// 16-lane dot product. The lane layout fixes the summation tree, which keeps
// the result independent of vector width the compiler picks.
template <typename T>
T dot(const T* a, const T* b, int64_t n) {
    T acc[16] = {T(0)};
    int64_t i = 0;
    for (; i + 16 <= n; i += 16)
        for (int l = 0; l < 16; ++l) acc[l] += a[i + l] * b[i + l];
    T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
    for (int l = 0; l < 4; ++l) {
        s0 += acc[l];
        s1 += acc[4 + l];
        s2 += acc[8 + l];
        s3 += acc[12 + l];
    }
    T s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T sum_squares(const T* a, int64_t n) {
    return dot(a, a, n);
}

// c[m x n] = a[m x k] * b[k x n], naive triple loop, serial. Reference path.
template <typename T>
basic_tensor<T> matmul_ref(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0])
        throw shape_error("matmul: inner dimensions do not match, " + shape_str(a.shape) + " x " +
                          shape_str(b.shape));
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    basic_tensor<T> c({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T s = T(0);
            for (int64_t t = 0; t < k; ++t) s += a.data[i * k + t] * b.data[t * n + j];
            c.data[i * n + j] = s;
        }
    return c;
}

// c[m x n] = a[m x k] * b[k x n]. ikj loop with row-vector updates.
template <typename T>
basic_tensor<T> matmul(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0])
        throw shape_error("matmul: inner dimensions do not match, " + shape_str(a.shape) + " x " +
                          shape_str(b.shape));
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    basic_tensor<T> c({m, n});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        T* crow = c.data.data() + i * n;
        for (int64_t t = 0; t < k; ++t) {
            const T av = a.data[i * k + t];
            const T* brow = b.data.data() + t * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// c[m x n] = a[m x k] * b[n x k]^T. Rows of a dot rows of b; the hot kernel
// behind every linear layer.
template <typename T>
void matmul_nt_into(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
}

template <typename T>
basic_tensor<T> matmul_nt(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[1])
        throw shape_error("matmul_nt: inner dimensions do not match, " + shape_str(a.shape) +
                          " x " + shape_str(b.shape) + "^T");
    basic_tensor<T> c({a.shape[0], b.shape[0]});
    matmul_nt_into(a.data.data(), b.data.data(), c.data.data(), a.shape[0], a.shape[1], b.shape[0]);
    return c;
}

// c[m x n] = a[r x m]^T * b[r x n]. Accumulates rank-1 updates in fixed row
// order; used for weight gradients (dW = dY^T X).
template <typename T>
basic_tensor<T> matmul_tn(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[0] != b.shape[0])
        throw shape_error("matmul_tn: inner dimensions do not match, " + shape_str(a.shape) +
                          "^T x " + shape_str(b.shape));
    const int64_t r = a.shape[0], m = a.shape[1], n = b.shape[1];
    basic_tensor<T> c({m, n});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        T* crow = c.data.data() + i * n;
        for (int64_t t = 0; t < r; ++t) {
            const T av = a.data[t * m + i];
            const T* brow = b.data.data() + t * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// Softmax over the last dimension, max-subtracted for stability.
template <typename T>
void softmax_lastdim_inplace(basic_tensor<T>& x) {
    const int64_t d = x.last_dim();
    if (d < 1) throw shape_error("softmax: empty last dimension");
    const int64_t rows = x.rows2d();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        T* p = x.row(r);
        T mx = p[0];
        for (int64_t j = 1; j < d; ++j) mx = std::max(mx, p[j]);
        T sum = T(0);
        for (int64_t j = 0; j < d; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        const T inv = T(1) / sum;
        for (int64_t j = 0; j < d; ++j) p[j] *= inv;
    }
}

template <typename T>
basic_tensor<T> softmax_lastdim(basic_tensor<T> x) {
    softmax_lastdim_inplace(x);
    return x;
}

// y = x / sqrt(mean(x^2) + eps) * gain, per last-dim slice.
template <typename T>
basic_tensor<T> rmsnorm(const basic_tensor<T>& x, const basic_tensor<T>& gain, T eps) {
    const int64_t d = x.last_dim();
    if (gain.numel() != d)
        throw shape_error("rmsnorm: gain length " + shape_str(gain.shape) +
                          " does not match last dimension of " + shape_str(x.shape));
    basic_tensor<T> y(x.shape);
    const int64_t rows = x.rows2d();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const T* p = x.row(r);
        T* q = y.data.data() + r * d;
        const T ms = sum_squares(p, d) / T(d);
        const T inv = T(1) / std::sqrt(ms + eps);
        for (int64_t j = 0; j < d; ++j) q[j] = p[j] * inv * gain.data[static_cast<size_t>(j)];
    }
    return y;
}

template <typename T>
T silu_scalar(T x) {
    return x / (T(1) + std::exp(-x));
}

// tanh approximation with constants 0.7978845608 (sqrt(2/pi)) and 0.044715.
template <typename T>
T gelu_scalar(T x) {
    const T c0 = T(0.7978845608), c1 = T(0.044715);
    return T(0.5) * x * (T(1) + std::tanh(c0 * (x + c1 * x * x * x)));
}

enum class unary_op { silu, gelu };

template <typename T>
basic_tensor<T> elementwise_unary(unary_op op, const basic_tensor<T>& x) {
    basic_tensor<T> y(x.shape);
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        y.data[i] = op == unary_op::silu ? silu_scalar(x.data[i]) : gelu_scalar(x.data[i]);
    return y;
}

enum class binary_op { add, mul };

// Same shape, or b broadcast over the trailing dimension of x.
template <typename T>
basic_tensor<T> elementwise_binary(binary_op op, const basic_tensor<T>& a, const basic_tensor<T>& b) {
    if (a.shape == b.shape) {
        basic_tensor<T> y(a.shape);
        const int64_t n = a.numel();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i)
            y.data[i] = op == binary_op::add ? a.data[i] + b.data[i] : a.data[i] * b.data[i];
        return y;
    }
    if (b.numel() == a.last_dim()) {
        const int64_t d = a.last_dim(), rows = a.rows2d();
        basic_tensor<T> y(a.shape);
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            const T* p = a.row(r);
            T* q = y.data.data() + r * d;
            for (int64_t j = 0; j < d; ++j)
                q[j] = op == binary_op::add ? p[j] + b.data[static_cast<size_t>(j)]
                                            : p[j] * b.data[static_cast<size_t>(j)];
        }
        return y;
    }
    throw shape_error("elementwise: shapes not broadcast-compatible, " + shape_str(a.shape) +
                      " vs " + shape_str(b.shape));
}

template <typename T>
basic_tensor<T> add(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    return elementwise_binary(binary_op::add, a, b);
}
template <typename T>
basic_tensor<T> mul(const basic_tensor<T>& a, const basic_tensor<T>& b) {
    return elementwise_binary(binary_op::mul, a, b);
}
template <typename T>
basic_tensor<T> silu(const basic_tensor<T>& x) {
    return elementwise_unary(unary_op::silu, x);
}
template <typename T>
basic_tensor<T> gelu(const basic_tensor<T>& x) {
    return elementwise_unary(unary_op::gelu, x);
}

template <typename T>
basic_tensor<T> scale(const basic_tensor<T>& x, T c) {
    basic_tensor<T> y(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] * c;
    return y;
}

template <typename T>
void axpy(T* dst, const T* src, T c, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] += c * src[i];
}

template <typename T>
bool all_finite(const basic_tensor<T>& x) {
    for (T v : x.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace eagle
