#pragma once

// Runtime-dispatched numeric kernels.
//
// Every kernel exists as a portable scalar reference and as SIMD variants
// (AVX2+FMA, AVX-512F on x86-64; NEON on AArch64). The best variant the CPU
// supports is selected on first use; DESPECKLE_ISA=scalar|avx2|avx512|neon
// overrides the choice, and set_active_isa() switches it at runtime (tests use
// this to check every variant against the scalar reference).
//
// Elementwise kernels are bit-identical across variants (no FMA contraction).
// Reductions and GEMM accumulate in a different order per variant and agree
// only to rounding.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "despeckle/simd_table.hpp"

namespace despeckle::simd {

const char* to_string(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

// Compiled in and supported by the running CPU.
bool is_supported(Isa isa) noexcept;
std::vector<Isa> supported_isas();
Isa best_isa() noexcept;

Isa active_isa() noexcept;
void set_active_isa(Isa isa);

class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
    ~ScopedIsa() { set_active_isa(previous_); }
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

const KernelTable& kernels() noexcept;

// --- convenience wrappers over the active table -----------------------------

inline void axpy(std::size_t n, double a, const double* x, double* y) { kernels().axpy(n, a, x, y); }
inline void add_scaled(std::size_t n, const double* x, double s, const double* y, double* out) {
    kernels().add_scaled(n, x, s, y, out);
}
inline double multiplier_step(std::size_t n, double mu, double alpha, const double* z, const double* m,
                              double* lam, double* acc, bool accumulate) {
    return kernels().multiplier_step(n, mu, alpha, z, m, lam, acc, accumulate);
}
inline double sum_squares(std::size_t n, const double* x) { return kernels().sum_squares(n, x); }
inline double diff_sum_squares(std::size_t n, const double* a, const double* b) {
    return kernels().diff_sum_squares(n, a, b);
}

enum class Op { none, transpose };

// Column-major C = alpha*op(A)*op(B) + beta*C; op(A) is m x k, op(B) is k x n.
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

// Symmetric rank-k product, full n x n result written:
//   Op::none       C = alpha*A*A^T + beta*C   (A is n x k)
//   Op::transpose  C = alpha*A^T*A + beta*C   (A is k x n)
void syrk(Op op_a, std::size_t n, std::size_t k, double alpha, const double* a, std::size_t lda,
          double beta, double* c, std::size_t ldc);

} // namespace despeckle::simd
