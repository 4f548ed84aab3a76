#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "aod/errors.hpp"

namespace aod {

// Dense row-major tensor of doubles. All network math runs in 64-bit.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) throw DataError("tensor: data length does not match shape");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::size_t numel() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

// gemm(c, a, b, m, k, n, accumulate): C(m x n) = [C +] A(m x k) * B(k x n),
// all row-major.
//
// The hot path keeps a 4-row by 32-column block of C in vector registers
// across the whole k loop (16 accumulator vectors), which is what makes the
// conv/dense layers compute-bound rather than load/store-bound. Per C
// element the accumulation order is plain k-ascending either way, so the
// scalar tail paths and the reference implementations agree to rounding.
#if defined(__GNUC__) || defined(__clang__)

namespace detail {

using v4d = double __attribute__((vector_size(32))); // 4 doubles per lane group

inline v4d load4(const double* p) {
    v4d v;
    __builtin_memcpy(&v, p, sizeof(v));
    return v;
}
inline void store4(double* p, v4d v) { __builtin_memcpy(p, &v, sizeof(v)); }
inline v4d fill4(double s) { return v4d{s, s, s, s}; }

} // namespace detail

inline void gemm(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate) {
    using detail::v4d;
    constexpr std::size_t JT = 32; // 8 vectors of 4 doubles
    constexpr std::size_t IT = 4;
    const v4d zero = detail::fill4(0.0);

    std::size_t j0 = 0;
    for (; j0 + JT <= n; j0 += JT) {
        std::size_t i0 = 0;
        for (; i0 + IT <= m; i0 += IT) {
            v4d acc[IT][8];
            for (std::size_t it = 0; it < IT; ++it)
                for (std::size_t v = 0; v < 8; ++v)
                    acc[it][v] = accumulate ? detail::load4(c + (i0 + it) * n + j0 + 4 * v) : zero;
            const double* a0 = a + (i0 + 0) * k;
            const double* a1 = a + (i0 + 1) * k;
            const double* a2 = a + (i0 + 2) * k;
            const double* a3 = a + (i0 + 3) * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double* brow = b + kk * n + j0;
                v4d bv[8];
                for (std::size_t v = 0; v < 8; ++v) bv[v] = detail::load4(brow + 4 * v);
                const v4d av0 = detail::fill4(a0[kk]), av1 = detail::fill4(a1[kk]);
                const v4d av2 = detail::fill4(a2[kk]), av3 = detail::fill4(a3[kk]);
                for (std::size_t v = 0; v < 8; ++v) {
                    acc[0][v] += av0 * bv[v];
                    acc[1][v] += av1 * bv[v];
                    acc[2][v] += av2 * bv[v];
                    acc[3][v] += av3 * bv[v];
                }
            }
            for (std::size_t it = 0; it < IT; ++it)
                for (std::size_t v = 0; v < 8; ++v)
                    detail::store4(c + (i0 + it) * n + j0 + 4 * v, acc[it][v]);
        }
        for (; i0 < m; ++i0) {
            v4d acc[8];
            for (std::size_t v = 0; v < 8; ++v)
                acc[v] = accumulate ? detail::load4(c + i0 * n + j0 + 4 * v) : zero;
            const double* arow = a + i0 * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double* brow = b + kk * n + j0;
                const v4d av = detail::fill4(arow[kk]);
                for (std::size_t v = 0; v < 8; ++v) acc[v] += av * detail::load4(brow + 4 * v);
            }
            for (std::size_t v = 0; v < 8; ++v) detail::store4(c + i0 * n + j0 + 4 * v, acc[v]);
        }
    }
    if (j0 < n) { // column tail
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            const double* arow = a + i * k;
            if (!accumulate)
                for (std::size_t j = j0; j < n; ++j) crow[j] = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                const double* brow = b + kk * n;
                for (std::size_t j = j0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

#else // portable fallback

inline void gemm(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    constexpr std::size_t kBlock = 512;
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
        const std::size_t j1 = std::min(n, j0 + kBlock);
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            const double* arow = a + i * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                const double* brow = b + kk * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

#endif

inline void gemm_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                     std::size_t n) {
    gemm(c, a, b, m, k, n, true);
}

// dst(cols x rows) = src(rows x cols)^T
inline void transpose_into(double* dst, const double* src, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

} // namespace aod
