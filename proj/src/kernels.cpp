#include "vad/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace vad::kernels {

namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void relu_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* x, const double* up, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) g[i] += up[i];
}

const Backend scalar_backend = {
    "scalar",
    axpy_scalar,
    dot_scalar,
    sum_squares_scalar,
    add_scalar,
    sub_scalar,
    mul_scalar,
    scale_scalar,
    relu_scalar,
    relu_backward_scalar,
};

const Backend& pick_active() {
    if (const char* env = std::getenv("VADFUSE_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return scalar();
        if (std::strcmp(env, "avx2") == 0) return avx2();
    }
    return avx2_available() ? avx2() : scalar();
}

}  // namespace

const Backend& scalar() { return scalar_backend; }

const Backend& active() {
    static const Backend& chosen = pick_active();
    return chosen;
}

}  // namespace vad::kernels
