#pragma once

#include <cstddef>

// Data-parallel inner loops used by the tensor ops. Every kernel has a
// scalar reference implementation and, on x86 machines with AVX2, a
// vectorized variant selected once at startup. The active backend can be
// forced with the VADFUSE_KERNELS environment variable ("scalar" or
// "avx2"), which the equivalence tests use to compare both paths.

namespace vad::kernels {

struct Backend {
    const char* name;
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double s, double* out, std::size_t n);
    void (*relu)(const double* x, double* out, std::size_t n);
    // g[i] += up[i] where x[i] > 0
    void (*relu_backward)(const double* x, const double* up, double* g, std::size_t n);
};

const Backend& scalar();
const Backend& avx2();       // falls back to scalar when AVX2 is unavailable
bool avx2_available();

// Backend chosen at startup (AVX2 when available, unless overridden).
const Backend& active();

}  // namespace vad::kernels
