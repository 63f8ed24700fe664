// Portable reference kernels. The SIMD variants are tested against these.

#include "despeckle/simd_table.hpp"

namespace despeckle::simd {
namespace {

constexpr size_t kMr = 4;
constexpr size_t kNr = 4;

void gemm_block(size_t kc, const double* a, const double* b, double* c, size_t ldc, double alpha,
                double beta) {
    double acc[kMr * kNr] = {};
    for (size_t p = 0; p < kc; ++p) {
        const double* ap = a + p * kMr;
        const double* bp = b + p * kNr;
        for (size_t j = 0; j < kNr; ++j) {
            const double bj = bp[j];
            for (size_t i = 0; i < kMr; ++i) acc[i + j * kMr] += ap[i] * bj;
        }
    }
    for (size_t j = 0; j < kNr; ++j) {
        double* cj = c + j * ldc;
        if (beta == 0.0) {
            for (size_t i = 0; i < kMr; ++i) cj[i] = alpha * acc[i + j * kMr];
        } else {
            for (size_t i = 0; i < kMr; ++i) cj[i] = beta * cj[i] + alpha * acc[i + j * kMr];
        }
    }
}

void axpy(size_t n, double a, const double* x, double* y) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scaled(size_t n, const double* x, double s, const double* y, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] + s * y[i];
}

double multiplier_step(size_t n, double mu, double alpha, const double* z, const double* m, double* lam,
                       double* acc, bool accumulate) {
    double r = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = z[i] - m[i];
        lam[i] += mu * d;
        acc[i] = accumulate ? acc[i] + alpha * m[i] : alpha * m[i];
        r += d * d;
    }
    return r;
}

double sum_squares(size_t n, const double* x) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

double diff_sum_squares(size_t n, const double* a, const double* b) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kTable{
    Isa::scalar, kMr, kNr, gemm_block, axpy, add_scaled, multiplier_step, sum_squares, diff_sum_squares,
};

} // namespace

const KernelTable* scalar_kernels() noexcept { return &kTable; }

} // namespace despeckle::simd
