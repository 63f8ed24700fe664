#pragma once

// Dense factorizations (LAPACK-backed) and Gram-matrix helpers that work on
// matricizations of tensor-layout buffers without materializing them.

#include <cstddef>
#include <span>
#include <vector>

#include "despeckle/tensor.hpp"

namespace despeckle::linalg {

struct Svd {
    DenseMatrix u;              // m x r, r = min(m, n)
    std::vector<double> s;      // descending
    DenseMatrix vt;             // r x n
};

// Thin SVD. Each left singular vector is flipped so that its largest-magnitude
// entry (first one on ties) is nonnegative; the matching row of vt follows.
Svd svd(MatrixView a);

struct SymEig {
    std::vector<double> values; // descending
    DenseMatrix vectors;        // columns match values
};

SymEig sym_eig(const DenseMatrix& g);
// Only the eigenpairs with eigenvalue > lower.
SymEig sym_eig_above(const DenseMatrix& g, double lower);

// Orthonormal basis of range(a) via Householder QR (m x n, m >= n).
DenseMatrix orthonormal_columns(DenseMatrix a);

// --- matricizations of a tensor-layout buffer --------------------------------

struct Unfolding {
    enum class Kind { canonical, mode };
    Kind kind = Kind::canonical;
    Dims dims;
    std::size_t index = 1;      // split k or mode n, 1-based
    std::size_t rows = 0;
    std::size_t cols = 0;
    // mode-n block structure: `right` blocks of left x rows
    std::size_t left = 1;
    std::size_t right = 1;

    bool gram_on_rows() const noexcept { return rows <= cols; }
    std::size_t gram_size() const noexcept { return gram_on_rows() ? rows : cols; }
};

Unfolding canonical_unfolding(std::span<const std::size_t> dims, std::size_t k);
Unfolding mode_unfolding(std::span<const std::size_t> dims, std::size_t n);

// G = A A^T when rows <= cols, else A^T A. g is resized as needed.
void gram(const Unfolding& u, const double* x, DenseMatrix& g);

// out = W A (rows side) or A W (cols side), written in tensor layout; W is
// gram_size() x gram_size().
void apply(const Unfolding& u, const double* x, MatrixView w, double* out);

// Same with W = V diag(d) V^T, V gram_size() x r.
void apply_factored(const Unfolding& u, const double* x, MatrixView v, std::span<const double> d, double* out);

// --- dominant subspaces -------------------------------------------------------

enum class Route { automatic, gram, svd };

struct Truncation {
    // Keep the fewest leading directions whose discarded tail satisfies
    // sum sigma_i^2 <= tail_budget^2, but never more than max_rank.
    std::size_t max_rank = static_cast<std::size_t>(-1);
    double tail_budget = 0.0;
};

struct Subspace {
    DenseMatrix basis;          // m x r, orthonormal columns
    std::vector<double> sigma;  // all singular values that were computed, descending
    std::size_t rank = 0;
};

// Leading left singular subspace of a (m x n). At least one direction is kept.
Subspace dominant_left(MatrixView a, const Truncation& t, Route route = Route::automatic);

// Same for the mode-n unfolding of a tensor-layout buffer.
Subspace dominant_left_mode(std::span<const double> x, std::span<const std::size_t> dims, std::size_t n,
                            const Truncation& t, Route route = Route::automatic);

} // namespace despeckle::linalg
