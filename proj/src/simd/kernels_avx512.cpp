// AVX-512F kernels. Compiled with -mavx512f -mavx2 -mfma -ffp-contract=off.

#include "despeckle/simd_table.hpp"

#if defined(__AVX512F__)

#include <immintrin.h>

namespace despeckle::simd {
namespace {

constexpr size_t kMr = 16;
constexpr size_t kNr = 12;

void gemm_block(size_t kc, const double* a, const double* b, double* c, size_t ldc, double alpha,
                double beta) {
    // Named accumulators: an array of __m512d is kept on the stack by GCC.
    __m512d c00 = _mm512_setzero_pd(), c01 = _mm512_setzero_pd();
    __m512d c10 = _mm512_setzero_pd(), c11 = _mm512_setzero_pd();
    __m512d c20 = _mm512_setzero_pd(), c21 = _mm512_setzero_pd();
    __m512d c30 = _mm512_setzero_pd(), c31 = _mm512_setzero_pd();
    __m512d c40 = _mm512_setzero_pd(), c41 = _mm512_setzero_pd();
    __m512d c50 = _mm512_setzero_pd(), c51 = _mm512_setzero_pd();
    __m512d c60 = _mm512_setzero_pd(), c61 = _mm512_setzero_pd();
    __m512d c70 = _mm512_setzero_pd(), c71 = _mm512_setzero_pd();
    __m512d c80 = _mm512_setzero_pd(), c81 = _mm512_setzero_pd();
    __m512d c90 = _mm512_setzero_pd(), c91 = _mm512_setzero_pd();
    __m512d c100 = _mm512_setzero_pd(), c101 = _mm512_setzero_pd();
    __m512d c110 = _mm512_setzero_pd(), c111 = _mm512_setzero_pd();

#define STEP(j, lo, hi)                                \
    {                                                  \
        const __m512d bj = _mm512_set1_pd(b[j]);       \
        lo = _mm512_fmadd_pd(a0, bj, lo);              \
        hi = _mm512_fmadd_pd(a1, bj, hi);              \
    }

    for (size_t p = 0; p < kc; ++p) {
        const __m512d a0 = _mm512_loadu_pd(a);
        const __m512d a1 = _mm512_loadu_pd(a + 8);
        STEP(0, c00, c01)
        STEP(1, c10, c11)
        STEP(2, c20, c21)
        STEP(3, c30, c31)
        STEP(4, c40, c41)
        STEP(5, c50, c51)
        STEP(6, c60, c61)
        STEP(7, c70, c71)
        STEP(8, c80, c81)
        STEP(9, c90, c91)
        STEP(10, c100, c101)
        STEP(11, c110, c111)
        a += kMr;
        b += kNr;
    }
#undef STEP

    const __m512d acc[kNr][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31},
                                 {c40, c41}, {c50, c51}, {c60, c61}, {c70, c71},
                                 {c80, c81}, {c90, c91}, {c100, c101}, {c110, c111}};
    const __m512d va = _mm512_set1_pd(alpha);
    if (beta == 0.0) {
        for (size_t j = 0; j < kNr; ++j) {
            _mm512_storeu_pd(c + j * ldc, _mm512_mul_pd(va, acc[j][0]));
            _mm512_storeu_pd(c + j * ldc + 8, _mm512_mul_pd(va, acc[j][1]));
        }
    } else {
        const __m512d vb = _mm512_set1_pd(beta);
        for (size_t j = 0; j < kNr; ++j) {
            double* cj = c + j * ldc;
            _mm512_storeu_pd(cj, _mm512_add_pd(_mm512_mul_pd(vb, _mm512_loadu_pd(cj)),
                                               _mm512_mul_pd(va, acc[j][0])));
            _mm512_storeu_pd(cj + 8, _mm512_add_pd(_mm512_mul_pd(vb, _mm512_loadu_pd(cj + 8)),
                                                   _mm512_mul_pd(va, acc[j][1])));
        }
    }
}

void axpy(size_t n, double a, const double* x, double* y) {
    const __m512d va = _mm512_set1_pd(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(y + i, _mm512_add_pd(_mm512_loadu_pd(y + i), _mm512_mul_pd(va, _mm512_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_scaled(size_t n, const double* x, double s, const double* y, double* out) {
    const __m512d vs = _mm512_set1_pd(s);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(out + i, _mm512_add_pd(_mm512_loadu_pd(x + i), _mm512_mul_pd(vs, _mm512_loadu_pd(y + i))));
    for (; i < n; ++i) out[i] = x[i] + s * y[i];
}

double multiplier_step(size_t n, double mu, double alpha, const double* z, const double* m, double* lam,
                       double* acc, bool accumulate) {
    const __m512d vmu = _mm512_set1_pd(mu);
    const __m512d valpha = _mm512_set1_pd(alpha);
    __m512d r = _mm512_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m512d vm = _mm512_loadu_pd(m + i);
        const __m512d d = _mm512_sub_pd(_mm512_loadu_pd(z + i), vm);
        _mm512_storeu_pd(lam + i, _mm512_add_pd(_mm512_loadu_pd(lam + i), _mm512_mul_pd(vmu, d)));
        const __m512d t = _mm512_mul_pd(valpha, vm);
        _mm512_storeu_pd(acc + i, accumulate ? _mm512_add_pd(_mm512_loadu_pd(acc + i), t) : t);
        r = _mm512_fmadd_pd(d, d, r);
    }
    double s = _mm512_reduce_add_pd(r);
    for (; i < n; ++i) {
        const double d = z[i] - m[i];
        lam[i] += mu * d;
        acc[i] = accumulate ? acc[i] + alpha * m[i] : alpha * m[i];
        s += d * d;
    }
    return s;
}

double sum_squares(size_t n, const double* x) {
    __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        const __m512d v0 = _mm512_loadu_pd(x + i);
        const __m512d v1 = _mm512_loadu_pd(x + i + 8);
        s0 = _mm512_fmadd_pd(v0, v0, s0);
        s1 = _mm512_fmadd_pd(v1, v1, s1);
    }
    double s = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

double diff_sum_squares(size_t n, const double* a, const double* b) {
    __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        const __m512d d0 = _mm512_sub_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i));
        const __m512d d1 = _mm512_sub_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8));
        s0 = _mm512_fmadd_pd(d0, d0, s0);
        s1 = _mm512_fmadd_pd(d1, d1, s1);
    }
    double s = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kTable{
    Isa::avx512, kMr, kNr, gemm_block, axpy, add_scaled, multiplier_step, sum_squares, diff_sum_squares,
};

} // namespace

const KernelTable* avx512_kernels() noexcept { return &kTable; }

} // namespace despeckle::simd

#else

namespace despeckle::simd {
const KernelTable* avx512_kernels() noexcept { return nullptr; }
} // namespace despeckle::simd

#endif
