// Blocked GEMM driver: panels of op(A) and op(B) are packed once per cache
// block and fed to the active register-block kernel. The driver is ISA-neutral;
// only the kernel table's gemm_block and its mr x nr shape change.

#include <algorithm>
#include <vector>

#include "despeckle/simd.hpp"

namespace despeckle::simd {
namespace {

constexpr std::size_t kKc = 256;
constexpr std::size_t kMcTarget = 192;
constexpr std::size_t kNcTarget = 4080;

struct Operand {
    const double* data;
    std::size_t ld;
    Op op;

    double at(std::size_t i, std::size_t j) const {
        return op == Op::none ? data[i + j * ld] : data[j + i * ld];
    }
};

// op(A)[ic:ic+mc, pc:pc+kc] -> panels of mr rows, zero padded.
void pack_a(const Operand& a, std::size_t ic, std::size_t pc, std::size_t mc, std::size_t kc,
            std::size_t mr, double* out) {
    for (std::size_t ir = 0; ir < mc; ir += mr) {
        const std::size_t rows = std::min(mr, mc - ir);
        double* panel = out + ir * kc;
        if (a.op == Op::none) {
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = a.data + (ic + ir) + (pc + p) * a.ld;
                double* dst = panel + p * mr;
                std::size_t i = 0;
                for (; i < rows; ++i) dst[i] = src[i];
                for (; i < mr; ++i) dst[i] = 0.0;
            }
        } else {
            for (std::size_t i = 0; i < mr; ++i) {
                if (i < rows) {
                    const double* src = a.data + pc + (ic + ir + i) * a.ld;
                    for (std::size_t p = 0; p < kc; ++p) panel[p * mr + i] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) panel[p * mr + i] = 0.0;
                }
            }
        }
    }
}

// op(B)[pc:pc+kc, jc:jc+nc] -> panels of nr columns, zero padded.
void pack_b(const Operand& b, std::size_t pc, std::size_t jc, std::size_t kc, std::size_t nc,
            std::size_t nr, double* out) {
    for (std::size_t jr = 0; jr < nc; jr += nr) {
        const std::size_t cols = std::min(nr, nc - jr);
        double* panel = out + jr * kc;
        if (b.op == Op::none) {
            for (std::size_t j = 0; j < nr; ++j) {
                if (j < cols) {
                    const double* src = b.data + pc + (jc + jr + j) * b.ld;
                    for (std::size_t p = 0; p < kc; ++p) panel[p * nr + j] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) panel[p * nr + j] = 0.0;
                }
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = b.data + (jc + jr) + (pc + p) * b.ld;
                double* dst = panel + p * nr;
                std::size_t j = 0;
                for (; j < cols; ++j) dst[j] = src[j];
                for (; j < nr; ++j) dst[j] = 0.0;
            }
        }
    }
}

void scale_c(std::size_t m, std::size_t n, double beta, double* c, std::size_t ldc) {
    for (std::size_t j = 0; j < n; ++j) {
        double* cj = c + j * ldc;
        if (beta == 0.0) {
            std::fill(cj, cj + m, 0.0);
        } else if (beta != 1.0) {
            for (std::size_t i = 0; i < m; ++i) cj[i] *= beta;
        }
    }
}

void gemm_driver(const Operand& a, const Operand& b, std::size_t m, std::size_t n, std::size_t k,
                 double alpha, double beta, double* c, std::size_t ldc, bool upper_only) {
    if (m == 0 || n == 0) return;
    if (k == 0 || alpha == 0.0) {
        scale_c(m, n, beta, c, ldc);
        return;
    }

    const KernelTable& kt = kernels();
    const std::size_t mr = kt.mr;
    const std::size_t nr = kt.nr;
    const std::size_t mc_max = std::max(mr, kMcTarget / mr * mr);
    const std::size_t nc_max = std::max(nr, kNcTarget / nr * nr);

    const std::size_t kc_cap = std::min(kKc, k);
    const std::size_t nc_cap = std::min(nc_max, (n + nr - 1) / nr * nr);
    const std::size_t mc_cap = std::min(mc_max, (m + mr - 1) / mr * mr);

    thread_local std::vector<double> a_buf;
    thread_local std::vector<double> b_buf;
    if (a_buf.size() < mc_cap * kc_cap) a_buf.resize(mc_cap * kc_cap);
    if (b_buf.size() < nc_cap * kc_cap) b_buf.resize(nc_cap * kc_cap);

    double edge[16 * 16];

    for (std::size_t jc = 0; jc < n; jc += nc_max) {
        const std::size_t nc = std::min(nc_max, n - jc);
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            const double beta_eff = pc == 0 ? beta : 1.0;
            pack_b(b, pc, jc, kc, nc, nr, b_buf.data());

            for (std::size_t ic = 0; ic < m; ic += mc_max) {
                const std::size_t mc = std::min(mc_max, m - ic);
                if (upper_only && ic >= jc + nc) continue;
                pack_a(a, ic, pc, mc, kc, mr, a_buf.data());

                for (std::size_t jr = 0; jr < nc; jr += nr) {
                    const std::size_t cols = std::min(nr, nc - jr);
                    const double* bp = b_buf.data() + jr * kc;
                    for (std::size_t ir = 0; ir < mc; ir += mr) {
                        const std::size_t row0 = ic + ir;
                        const std::size_t col_last = jc + jr + cols - 1;
                        if (upper_only && row0 > col_last) continue;

                        const std::size_t rows = std::min(mr, mc - ir);
                        const double* ap = a_buf.data() + ir * kc;
                        double* ct = c + row0 + (jc + jr) * ldc;
                        if (rows == mr && cols == nr) {
                            kt.gemm_block(kc, ap, bp, ct, ldc, alpha, beta_eff);
                            continue;
                        }
                        kt.gemm_block(kc, ap, bp, edge, mr, 1.0, 0.0);
                        for (std::size_t j = 0; j < cols; ++j) {
                            double* cj = ct + j * ldc;
                            const double* ej = edge + j * mr;
                            if (beta_eff == 0.0) {
                                for (std::size_t i = 0; i < rows; ++i) cj[i] = alpha * ej[i];
                            } else {
                                for (std::size_t i = 0; i < rows; ++i) cj[i] = beta_eff * cj[i] + alpha * ej[i];
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace

void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
    gemm_driver({a, lda, op_a}, {b, ldb, op_b}, m, n, k, alpha, beta, c, ldc, false);
}

void syrk(Op op_a, std::size_t n, std::size_t k, double alpha, const double* a, std::size_t lda, double beta,
          double* c, std::size_t ldc) {
    const Op op_b = op_a == Op::none ? Op::transpose : Op::none;
    gemm_driver({a, lda, op_a}, {a, lda, op_b}, n, n, k, alpha, beta, c, ldc, true);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j + 1; i < n; ++i) c[i + j * ldc] = c[j + i * ldc];
}

} // namespace despeckle::simd
