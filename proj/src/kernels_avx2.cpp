#include "mctd/kernels.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(__i386__)
#define MCTD_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define MCTD_HAVE_AVX2_TU 0
#endif

// AVX2 lane. Built into every binary; only reached when runtime dispatch has
// confirmed avx2+fma support, so the target attribute is safe.

namespace mctd::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double* y, double a, const double* x, std::size_t n);
void scale_mix_scalar(double* out, double a, const double* x, double b,
                      const double* y, std::size_t n);
void add_scaled_scalar(double* out, const double* x, double a, const double* y,
                       std::size_t n);
void gemv_scalar(const double* w, const double* x, const double* bias,
                 double* out, std::size_t rows, std::size_t cols);
void gemv_t_acc_scalar(const double* w, const double* v, double* out,
                       std::size_t rows, std::size_t cols);

#if MCTD_HAVE_AVX2_TU

#define MCTD_AVX2_TARGET __attribute__((target("avx2,fma")))

namespace {

MCTD_AVX2_TARGET inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

}  // namespace

MCTD_AVX2_TARGET
double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc = std::fma(a[i], b[i], acc);
    }
    return acc;
}

MCTD_AVX2_TARGET
void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) {
        y[i] = std::fma(a, x[i], y[i]);
    }
}

MCTD_AVX2_TARGET
void scale_mix_avx2(double* out, double a, const double* x, double b,
                    const double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        t = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), t);
        _mm256_storeu_pd(out + i, t);
    }
    for (; i < n; ++i) {
        out[i] = std::fma(a, x[i], b * y[i]);
    }
}

MCTD_AVX2_TARGET
void add_scaled_avx2(double* out, const double* x, double a, const double* y,
                     std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t = _mm256_fmadd_pd(va, _mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(out + i, t);
    }
    for (; i < n; ++i) {
        out[i] = std::fma(a, y[i], x[i]);
    }
}

MCTD_AVX2_TARGET
void gemv_avx2(const double* w, const double* x, const double* bias, double* out,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = dot_avx2(w + r * cols, x, cols) + (bias ? bias[r] : 0.0);
    }
}

MCTD_AVX2_TARGET
void gemv_t_acc_avx2(const double* w, const double* v, double* out,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_avx2(out, v[r], w + r * cols, cols);
    }
}

#else  // !MCTD_HAVE_AVX2_TU

double dot_avx2(const double* a, const double* b, std::size_t n) {
    return dot_scalar(a, b, n);
}
void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
    axpy_scalar(y, a, x, n);
}
void scale_mix_avx2(double* out, double a, const double* x, double b,
                    const double* y, std::size_t n) {
    scale_mix_scalar(out, a, x, b, y, n);
}
void add_scaled_avx2(double* out, const double* x, double a, const double* y,
                     std::size_t n) {
    add_scaled_scalar(out, x, a, y, n);
}
void gemv_avx2(const double* w, const double* x, const double* bias, double* out,
               std::size_t rows, std::size_t cols) {
    gemv_scalar(w, x, bias, out, rows, cols);
}
void gemv_t_acc_avx2(const double* w, const double* v, double* out,
                     std::size_t rows, std::size_t cols) {
    gemv_t_acc_scalar(w, v, out, rows, cols);
}

#endif

}  // namespace mctd::kernels::detail
