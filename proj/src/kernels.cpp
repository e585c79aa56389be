#include "mctd/kernels.hpp"

#include <cmath>

namespace mctd::kernels {

namespace detail {

double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double* y, double a, const double* x, std::size_t n);
void scale_mix_avx2(double* out, double a, const double* x, double b,
                    const double* y, std::size_t n);
void add_scaled_avx2(double* out, const double* x, double a, const double* y,
                     std::size_t n);
void gemv_avx2(const double* w, const double* x, const double* bias, double* out,
               std::size_t rows, std::size_t cols);
void gemv_t_acc_avx2(const double* w, const double* v, double* out,
                     std::size_t rows, std::size_t cols);

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc = std::fma(a[i], b[i], acc);
    }
    return acc;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::fma(a, x[i], y[i]);
    }
}

void scale_mix_scalar(double* out, double a, const double* x, double b,
                      const double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::fma(a, x[i], b * y[i]);
    }
}

void add_scaled_scalar(double* out, const double* x, double a, const double* y,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::fma(a, y[i], x[i]);
    }
}

void gemv_scalar(const double* w, const double* x, const double* bias,
                 double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias ? bias[r] : 0.0;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            acc = std::fma(row[c], x[c], acc);
        }
        out[r] = acc;
    }
}

void gemv_t_acc_scalar(const double* w, const double* v, double* out,
                       std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_scalar(out, v[r], w + r * cols, cols);
    }
}

}  // namespace detail

namespace {

Backend resolve(Backend requested) {
    if (requested == Backend::Auto) {
        return avx2_available() ? Backend::Avx2 : Backend::Scalar;
    }
    return requested;
}

Backend g_backend = resolve(Backend::Auto);

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select_backend(Backend backend) {
    g_backend = resolve(backend);
}

Backend active_backend() {
    return g_backend;
}

const char* backend_name(Backend backend) {
    switch (backend) {
        case Backend::Auto: return "auto";
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "?";
}

double dot(const double* a, const double* b, std::size_t n) {
    if (g_backend == Backend::Avx2) {
        return detail::dot_avx2(a, b, n);
    }
    return detail::dot_scalar(a, b, n);
}

void axpy(double* y, double a, const double* x, std::size_t n) {
    if (g_backend == Backend::Avx2) {
        detail::axpy_avx2(y, a, x, n);
        return;
    }
    detail::axpy_scalar(y, a, x, n);
}

void scale_mix(double* out, double a, const double* x, double b, const double* y,
               std::size_t n) {
    if (g_backend == Backend::Avx2) {
        detail::scale_mix_avx2(out, a, x, b, y, n);
        return;
    }
    detail::scale_mix_scalar(out, a, x, b, y, n);
}

void add_scaled(double* out, const double* x, double a, const double* y,
                std::size_t n) {
    if (g_backend == Backend::Avx2) {
        detail::add_scaled_avx2(out, x, a, y, n);
        return;
    }
    detail::add_scaled_scalar(out, x, a, y, n);
}

void gemv(const double* w, const double* x, const double* bias, double* out,
          std::size_t rows, std::size_t cols) {
    if (g_backend == Backend::Avx2) {
        detail::gemv_avx2(w, x, bias, out, rows, cols);
        return;
    }
    detail::gemv_scalar(w, x, bias, out, rows, cols);
}

void gemv_t_acc(const double* w, const double* v, double* out, std::size_t rows,
                std::size_t cols) {
    if (g_backend == Backend::Avx2) {
        detail::gemv_t_acc_avx2(w, v, out, rows, cols);
        return;
    }
    detail::gemv_t_acc_scalar(w, v, out, rows, cols);
}

}  // namespace mctd::kernels
