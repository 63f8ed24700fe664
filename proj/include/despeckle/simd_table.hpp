#pragma once

// Kernel function table shared by the ISA-specific translation units. Kept free
// of standard-library headers other than <stddef.h> so that code compiled with
// wider instruction sets never emits inline functions the rest of the program
// could pick up at link time.

#include <stddef.h>

namespace despeckle::simd {

enum class Isa { scalar, avx2, avx512, neon };

struct KernelTable {
    Isa isa;

    // GEMM register block: C[mr x nr] = beta*C + alpha * A_panel * B_panel,
    // A_panel packed as kc columns of mr, B_panel as kc rows of nr. beta == 0
    // overwrites C without reading it.
    size_t mr;
    size_t nr;
    void (*gemm_block)(size_t kc, const double* a, const double* b, double* c, size_t ldc,
                       double alpha, double beta);

    // y += a*x
    void (*axpy)(size_t n, double a, const double* x, double* y);
    // out = x + s*y
    void (*add_scaled)(size_t n, const double* x, double s, const double* y, double* out);
    // lam += mu*(z - m);  acc = (accumulate ? acc : 0) + alpha*m; returns sum (z - m)^2
    double (*multiplier_step)(size_t n, double mu, double alpha, const double* z, const double* m,
                            double* lam, double* acc, bool accumulate);
    double (*sum_squares)(size_t n, const double* x);
    double (*diff_sum_squares)(size_t n, const double* a, const double* b);
};

// Defined in the per-ISA translation units; null when not compiled in.
const KernelTable* scalar_kernels() noexcept;
const KernelTable* avx2_kernels() noexcept;
const KernelTable* avx512_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

} // namespace despeckle::simd
