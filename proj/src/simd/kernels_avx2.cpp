// AVX2 + FMA kernels. Compiled with -mavx2 -mfma -ffp-contract=off; selected at
// runtime only when the CPU reports both features.

#include "despeckle/simd_table.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace despeckle::simd {
namespace {

constexpr size_t kMr = 8;
constexpr size_t kNr = 6;

void gemm_block(size_t kc, const double* a, const double* b, double* c, size_t ldc, double alpha,
                double beta) {
    // Named accumulators: an array of __m256d is kept on the stack by GCC.
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
    __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();

    for (size_t p = 0; p < kc; ++p) {
        const __m256d a0 = _mm256_loadu_pd(a);
        const __m256d a1 = _mm256_loadu_pd(a + 4);
        __m256d bj;
        bj = _mm256_broadcast_sd(b + 0); c00 = _mm256_fmadd_pd(a0, bj, c00); c01 = _mm256_fmadd_pd(a1, bj, c01);
        bj = _mm256_broadcast_sd(b + 1); c10 = _mm256_fmadd_pd(a0, bj, c10); c11 = _mm256_fmadd_pd(a1, bj, c11);
        bj = _mm256_broadcast_sd(b + 2); c20 = _mm256_fmadd_pd(a0, bj, c20); c21 = _mm256_fmadd_pd(a1, bj, c21);
        bj = _mm256_broadcast_sd(b + 3); c30 = _mm256_fmadd_pd(a0, bj, c30); c31 = _mm256_fmadd_pd(a1, bj, c31);
        bj = _mm256_broadcast_sd(b + 4); c40 = _mm256_fmadd_pd(a0, bj, c40); c41 = _mm256_fmadd_pd(a1, bj, c41);
        bj = _mm256_broadcast_sd(b + 5); c50 = _mm256_fmadd_pd(a0, bj, c50); c51 = _mm256_fmadd_pd(a1, bj, c51);
        a += kMr;
        b += kNr;
    }

    const __m256d acc[kNr][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};
    const __m256d va = _mm256_set1_pd(alpha);
    if (beta == 0.0) {
        for (size_t j = 0; j < kNr; ++j) {
            _mm256_storeu_pd(c + j * ldc, _mm256_mul_pd(va, acc[j][0]));
            _mm256_storeu_pd(c + j * ldc + 4, _mm256_mul_pd(va, acc[j][1]));
        }
    } else {
        const __m256d vb = _mm256_set1_pd(beta);
        for (size_t j = 0; j < kNr; ++j) {
            double* cj = c + j * ldc;
            _mm256_storeu_pd(cj, _mm256_add_pd(_mm256_mul_pd(vb, _mm256_loadu_pd(cj)),
                                               _mm256_mul_pd(va, acc[j][0])));
            _mm256_storeu_pd(cj + 4, _mm256_add_pd(_mm256_mul_pd(vb, _mm256_loadu_pd(cj + 4)),
                                                   _mm256_mul_pd(va, acc[j][1])));
        }
    }
}

void axpy(size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_scaled(size_t n, const double* x, double s, const double* y, double* out) {
    const __m256d vs = _mm256_set1_pd(s);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vs, _mm256_loadu_pd(y + i))));
    for (; i < n; ++i) out[i] = x[i] + s * y[i];
}

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double multiplier_step(size_t n, double mu, double alpha, const double* z, const double* m, double* lam,
                       double* acc, bool accumulate) {
    const __m256d vmu = _mm256_set1_pd(mu);
    const __m256d valpha = _mm256_set1_pd(alpha);
    __m256d r = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vm = _mm256_loadu_pd(m + i);
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(z + i), vm);
        _mm256_storeu_pd(lam + i, _mm256_add_pd(_mm256_loadu_pd(lam + i), _mm256_mul_pd(vmu, d)));
        const __m256d t = _mm256_mul_pd(valpha, vm);
        _mm256_storeu_pd(acc + i, accumulate ? _mm256_add_pd(_mm256_loadu_pd(acc + i), t) : t);
        r = _mm256_fmadd_pd(d, d, r);
    }
    double s = hsum(r);
    for (; i < n; ++i) {
        const double d = z[i] - m[i];
        lam[i] += mu * d;
        acc[i] = accumulate ? acc[i] + alpha * m[i] : alpha * m[i];
        s += d * d;
    }
    return s;
}


double sum_squares(size_t n, const double* x) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d v0 = _mm256_loadu_pd(x + i);
        const __m256d v1 = _mm256_loadu_pd(x + i + 4);
        s0 = _mm256_fmadd_pd(v0, v0, s0);
        s1 = _mm256_fmadd_pd(v1, v1, s1);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

double diff_sum_squares(size_t n, const double* a, const double* b) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        s0 = _mm256_fmadd_pd(d0, d0, s0);
        s1 = _mm256_fmadd_pd(d1, d1, s1);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kTable{
    Isa::avx2, kMr, kNr, gemm_block, axpy, add_scaled, multiplier_step, sum_squares, diff_sum_squares,
};

} // namespace

const KernelTable* avx2_kernels() noexcept { return &kTable; }

} // namespace despeckle::simd

#else

namespace despeckle::simd {
const KernelTable* avx2_kernels() noexcept { return nullptr; }
} // namespace despeckle::simd

#endif
