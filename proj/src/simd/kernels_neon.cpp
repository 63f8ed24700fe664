// AArch64 NEON kernels (Advanced SIMD is mandatory on AArch64, so no runtime
// feature probe is needed beyond the architecture check).

#include "despeckle/simd_table.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

namespace despeckle::simd {
namespace {

constexpr size_t kMr = 8;
constexpr size_t kNr = 4;

void gemm_block(size_t kc, const double* a, const double* b, double* c, size_t ldc, double alpha,
                double beta) {
    float64x2_t acc[kNr][4];
    for (size_t j = 0; j < kNr; ++j)
        for (size_t r = 0; r < 4; ++r) acc[j][r] = vdupq_n_f64(0.0);

    for (size_t p = 0; p < kc; ++p) {
        const float64x2_t a0 = vld1q_f64(a);
        const float64x2_t a1 = vld1q_f64(a + 2);
        const float64x2_t a2 = vld1q_f64(a + 4);
        const float64x2_t a3 = vld1q_f64(a + 6);
        for (size_t j = 0; j < kNr; ++j) {
            const float64x2_t bj = vdupq_n_f64(b[j]);
            acc[j][0] = vfmaq_f64(acc[j][0], a0, bj);
            acc[j][1] = vfmaq_f64(acc[j][1], a1, bj);
            acc[j][2] = vfmaq_f64(acc[j][2], a2, bj);
            acc[j][3] = vfmaq_f64(acc[j][3], a3, bj);
        }
        a += kMr;
        b += kNr;
    }

    const float64x2_t va = vdupq_n_f64(alpha);
    const float64x2_t vb = vdupq_n_f64(beta);
    for (size_t j = 0; j < kNr; ++j) {
        double* cj = c + j * ldc;
        for (size_t r = 0; r < 4; ++r) {
            const float64x2_t t = vmulq_f64(va, acc[j][r]);
            if (beta == 0.0) {
                vst1q_f64(cj + 2 * r, t);
            } else {
                vst1q_f64(cj + 2 * r, vaddq_f64(vmulq_f64(vb, vld1q_f64(cj + 2 * r)), t));
            }
        }
    }
}

void axpy(size_t n, double a, const double* x, double* y) {
    const float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_scaled(size_t n, const double* x, double s, const double* y, double* out) {
    const float64x2_t vs = vdupq_n_f64(s);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vmulq_f64(vs, vld1q_f64(y + i))));
    for (; i < n; ++i) out[i] = x[i] + s * y[i];
}

double multiplier_step(size_t n, double mu, double alpha, const double* z, const double* m, double* lam,
                       double* acc, bool accumulate) {
    const float64x2_t vmu = vdupq_n_f64(mu);
    const float64x2_t valpha = vdupq_n_f64(alpha);
    float64x2_t r = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vm = vld1q_f64(m + i);
        const float64x2_t d = vsubq_f64(vld1q_f64(z + i), vm);
        vst1q_f64(lam + i, vaddq_f64(vld1q_f64(lam + i), vmulq_f64(vmu, d)));
        const float64x2_t t = vmulq_f64(valpha, vm);
        vst1q_f64(acc + i, accumulate ? vaddq_f64(vld1q_f64(acc + i), t) : t);
        r = vfmaq_f64(r, d, d);
    }
    double s = vaddvq_f64(r);
    for (; i < n; ++i) {
        const double d = z[i] - m[i];
        lam[i] += mu * d;
        acc[i] = accumulate ? acc[i] + alpha * m[i] : alpha * m[i];
        s += d * d;
    }
    return s;
}

double sum_squares(size_t n, const double* x) {
    float64x2_t s0 = vdupq_n_f64(0.0), s1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float64x2_t v0 = vld1q_f64(x + i);
        const float64x2_t v1 = vld1q_f64(x + i + 2);
        s0 = vfmaq_f64(s0, v0, v0);
        s1 = vfmaq_f64(s1, v1, v1);
    }
    double s = vaddvq_f64(vaddq_f64(s0, s1));
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

double diff_sum_squares(size_t n, const double* a, const double* b) {
    float64x2_t s0 = vdupq_n_f64(0.0), s1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        const float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
        s0 = vfmaq_f64(s0, d0, d0);
        s1 = vfmaq_f64(s1, d1, d1);
    }
    double s = vaddvq_f64(vaddq_f64(s0, s1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kTable{
    Isa::neon, kMr, kNr, gemm_block, axpy, add_scaled, multiplier_step, sum_squares, diff_sum_squares,
};

} // namespace

const KernelTable* neon_kernels() noexcept { return &kTable; }

} // namespace despeckle::simd

#else

namespace despeckle::simd {
const KernelTable* neon_kernels() noexcept { return nullptr; }
} // namespace despeckle::simd

#endif
