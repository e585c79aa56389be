#pragma once

#include <cstddef>

// Arithmetic inner loops shared by the denoiser and the samplers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant selected at runtime. Contract across backends:
//   - element-wise kernels (axpy, scale_mix, add_scaled) are bit-identical:
//     the scalar reference is written with std::fma so it matches the fused
//     SIMD lanes exactly;
//   - reductions (dot, gemv, gemv_t_acc) accumulate in a different order per
//     backend and agree only to rounding, tested at 1e-12 relative.

namespace mctd::kernels {

enum class Backend { Auto, Scalar, Avx2 };

// Selects the backend for all subsequent kernel calls. Auto resolves to the
// widest instruction set the CPU supports. Not thread-safe against in-flight
// kernel calls; call once at startup or from single-threaded test code.
void select_backend(Backend backend);

// Backend currently in effect (never Auto).
Backend active_backend();

bool avx2_available();

const char* backend_name(Backend backend);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += a * x[i]
void axpy(double* y, double a, const double* x, std::size_t n);

// out[i] = a * x[i] + b * y[i]
void scale_mix(double* out, double a, const double* x, double b, const double* y,
               std::size_t n);

// out[i] = x[i] + a * y[i]
void add_scaled(double* out, const double* x, double a, const double* y,
                std::size_t n);

// out = W x + bias, W row-major [rows x cols]; bias may be null.
void gemv(const double* w, const double* x, const double* bias, double* out,
          std::size_t rows, std::size_t cols);

// out[c] += sum_r W[r][c] * v[r]  (transpose apply, accumulating)
void gemv_t_acc(const double* w, const double* v, double* out, std::size_t rows,
                std::size_t cols);

}  // namespace mctd::kernels
