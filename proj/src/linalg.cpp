#include "despeckle/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/simd.hpp"

namespace despeckle::linalg {
namespace {

using simd::Op;

lapack_int to_lapack(std::size_t v) { return static_cast<lapack_int>(v); }

void require_finite(const double* p, std::size_t n, const char* what) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) throw InvalidInput(std::string(what) + ": non-finite entries");
}

// Largest-magnitude entry of each column made nonnegative; returns flips.
std::vector<bool> normalize_signs(DenseMatrix& u) {
    std::vector<bool> flipped(u.cols(), false);
    for (std::size_t j = 0; j < u.cols(); ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < u.rows(); ++i) {
            const double a = std::abs(u(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (u.rows() > 0 && u(arg, j) < 0.0) {
            flipped[j] = true;
            for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
        }
    }
    return flipped;
}

DenseMatrix copy_view(MatrixView a) {
    DenseMatrix m(a.rows, a.cols);
    for (std::size_t j = 0; j < a.cols; ++j) std::copy_n(a.data + j * a.ld, a.rows, &m(0, j));
    return m;
}

DenseMatrix leading_columns(const DenseMatrix& m, std::size_t r) {
    return DenseMatrix(m.rows(), r, std::vector<double>(m.data().begin(), m.data().begin() + m.rows() * r));
}

std::size_t numerical_rank(const std::vector<double>& sigma) {
    if (sigma.empty() || sigma.front() <= 0.0) return 0;
    const double cut = 1e-12 * sigma.front();
    return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cut; }));
}

std::size_t choose_rank(const std::vector<double>& sigma, const Truncation& t) {
    std::size_t r;
    if (t.tail_budget > 0.0) {
        const double budget2 = t.tail_budget * t.tail_budget;
        double tail = 0.0;
        r = sigma.size();
        while (r > 0 && tail + sigma[r - 1] * sigma[r - 1] <= budget2) {
            tail += sigma[r - 1] * sigma[r - 1];
            --r;
        }
    } else {
        r = numerical_rank(sigma);
    }
    r = std::min(r, t.max_rank);
    return std::max<std::size_t>(r, 1);
}

bool use_gram(Route route, std::size_t m, std::size_t n, const Truncation& t, double norm) {
    if (route != Route::automatic) return route == Route::gram;
    if (m * n <= (std::size_t{1} << 20)) return false;
    // Gram eigenvalues resolve singular values only down to ~sqrt(eps)*sigma_1.
    return t.tail_budget == 0.0 || t.tail_budget >= 1e-6 * norm;
}

// Copy of the mode-n unfolding of a tensor-layout buffer.
DenseMatrix materialize(const Unfolding& u, const double* x) {
    if (u.kind == Unfolding::Kind::canonical) return copy_view({u.rows, u.cols, u.rows, x});
    DenseMatrix m(u.rows, u.cols);
    for (std::size_t b = 0; b < u.right; ++b) {
        const double* blk = x + b * u.left * u.rows;
        for (std::size_t a = 0; a < u.left; ++a) {
            double* col = &m(0, a + u.left * b);
            for (std::size_t i = 0; i < u.rows; ++i) col[i] = blk[a + u.left * i];
        }
    }
    return m;
}

void scatter(const Unfolding& u, const DenseMatrix& m, double* out) {
    if (u.kind == Unfolding::Kind::canonical) {
        std::copy(m.data().begin(), m.data().end(), out);
        return;
    }
    for (std::size_t b = 0; b < u.right; ++b) {
        double* blk = out + b * u.left * u.rows;
        for (std::size_t a = 0; a < u.left; ++a) {
            const double* col = m.data().data() + (a + u.left * b) * u.rows;
            for (std::size_t i = 0; i < u.rows; ++i) blk[a + u.left * i] = col[i];
        }
    }
}

} // namespace

Svd svd(MatrixView a) {
    const std::size_t m = a.rows, n = a.cols, r = std::min(m, n);
    Svd out{DenseMatrix(m, r), std::vector<double>(r), DenseMatrix(r, n)};
    if (r == 0) return out;
    DenseMatrix work = copy_view(a);
    require_finite(work.data().data(), work.size(), "svd");
    const lapack_int info =
        LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', to_lapack(m), to_lapack(n), work.data().data(), to_lapack(m),
                       out.s.data(), out.u.data().data(), to_lapack(m), out.vt.data().data(), to_lapack(r));
    if (info != 0) throw NumericalError("dgesdd failed, info = " + std::to_string(info));
    const auto flipped = normalize_signs(out.u);
    for (std::size_t i = 0; i < r; ++i)
        if (flipped[i])
            for (std::size_t j = 0; j < n; ++j) out.vt(i, j) = -out.vt(i, j);
    return out;
}

SymEig sym_eig(const DenseMatrix& g) {
    const std::size_t n = g.rows();
    SymEig out{std::vector<double>(n), g};
    if (n == 0) return out;
    require_finite(g.data().data(), g.size(), "eigendecomposition");
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', to_lapack(n), out.vectors.data().data(),
                                           to_lapack(n), out.values.data());
    if (info != 0) throw NumericalError("dsyevd failed, info = " + std::to_string(info));
    std::reverse(out.values.begin(), out.values.end());
    DenseMatrix rev(n, n);
    for (std::size_t j = 0; j < n; ++j) std::copy_n(&out.vectors(0, n - 1 - j), n, &rev(0, j));
    out.vectors = std::move(rev);
    return out;
}

SymEig sym_eig_above(const DenseMatrix& g, double lower) {
    const std::size_t n = g.rows();
    SymEig out;
    if (n == 0) return out;
    require_finite(g.data().data(), g.size(), "eigendecomposition");
    double upper = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::abs(g(i, j));
        upper = std::max(upper, s);
    }
    upper = 2.0 * upper + 1.0;  // Gershgorin bound with margin
    if (!(lower < upper)) return out;

    DenseMatrix a = g;
    std::vector<double> w(n);
    DenseMatrix z(n, n);
    std::vector<lapack_int> isuppz(2 * n);
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', to_lapack(n), a.data().data(),
                                           to_lapack(n), lower, upper, 0, 0, 0.0, &found, w.data(),
                                           z.data().data(), to_lapack(n), isuppz.data());
    if (info != 0) throw NumericalError("dsyevr failed, info = " + std::to_string(info));
    const std::size_t k = static_cast<std::size_t>(found);
    out.values.resize(k);
    out.vectors = DenseMatrix(n, k);
    for (std::size_t j = 0; j < k; ++j) {
        out.values[j] = w[k - 1 - j];
        std::copy_n(&z(0, k - 1 - j), n, &out.vectors(0, j));
    }
    return out;
}

DenseMatrix orthonormal_columns(DenseMatrix a) {
    const std::size_t m = a.rows(), n = a.cols();
    if (n == 0) return a;
    if (m < n) throw InvalidArgument("orthonormal_columns: more columns than rows");
    std::vector<double> tau(n);
    lapack_int info = LAPACKE_dgeqrf(LAPACK_COL_MAJOR, to_lapack(m), to_lapack(n), a.data().data(), to_lapack(m),
                                     tau.data());
    if (info != 0) throw NumericalError("dgeqrf failed, info = " + std::to_string(info));
    info = LAPACKE_dorgqr(LAPACK_COL_MAJOR, to_lapack(m), to_lapack(n), to_lapack(n), a.data().data(), to_lapack(m),
                          tau.data());
    if (info != 0) throw NumericalError("dorgqr failed, info = " + std::to_string(info));
    return a;
}

Unfolding canonical_unfolding(std::span<const std::size_t> dims, std::size_t k) {
    if (k < 1 || k >= dims.size()) throw InvalidArgument("split index out of range");
    Unfolding u;
    u.kind = Unfolding::Kind::canonical;
    u.dims.assign(dims.begin(), dims.end());
    u.index = k;
    u.rows = 1;
    for (std::size_t i = 0; i < k; ++i) u.rows *= dims[i];
    u.cols = numel(dims) / u.rows;
    return u;
}

Unfolding mode_unfolding(std::span<const std::size_t> dims, std::size_t n) {
    if (n < 1 || n > dims.size()) throw InvalidArgument("mode out of range");
    Unfolding u;
    u.kind = Unfolding::Kind::mode;
    u.dims.assign(dims.begin(), dims.end());
    u.index = n;
    for (std::size_t i = 0; i + 1 < n; ++i) u.left *= dims[i];
    for (std::size_t i = n; i < dims.size(); ++i) u.right *= dims[i];
    u.rows = dims[n - 1];
    u.cols = u.left * u.right;
    return u;
}

void gram(const Unfolding& u, const double* x, DenseMatrix& g) {
    const std::size_t s = u.gram_size();
    if (g.rows() != s || g.cols() != s) g = DenseMatrix(s, s);
    double* gp = g.data().data();

    if (u.kind == Unfolding::Kind::canonical) {
        if (u.gram_on_rows())
            simd::syrk(Op::none, s, u.cols, 1.0, x, u.rows, 0.0, gp, s);
        else
            simd::syrk(Op::transpose, s, u.rows, 1.0, x, u.rows, 0.0, gp, s);
        return;
    }
    if (!u.gram_on_rows()) {
        const DenseMatrix m = materialize(u, x);
        simd::syrk(Op::transpose, s, u.rows, 1.0, m.data().data(), u.rows, 0.0, gp, s);
        return;
    }
    if (u.left == 1) {
        simd::syrk(Op::none, s, u.right, 1.0, x, u.rows, 0.0, gp, s);
        return;
    }
    // X_(n) X_(n)^T = sum over blocks B_b^T B_b, B_b = left x I_n.
    for (std::size_t b = 0; b < u.right; ++b)
        simd::syrk(Op::transpose, s, u.left, 1.0, x + b * u.left * u.rows, u.left, b == 0 ? 0.0 : 1.0, gp, s);
}

void apply(const Unfolding& u, const double* x, MatrixView w, double* out) {
    const std::size_t s = u.gram_size();
    if (w.rows != s || w.cols != s) throw InvalidArgument("apply: operator size mismatch");

    if (u.kind == Unfolding::Kind::canonical) {
        if (u.gram_on_rows())
            simd::gemm(Op::none, Op::none, u.rows, u.cols, s, 1.0, w.data, w.ld, x, u.rows, 0.0, out, u.rows);
        else
            simd::gemm(Op::none, Op::none, u.rows, u.cols, s, 1.0, x, u.rows, w.data, w.ld, 0.0, out, u.rows);
        return;
    }
    if (u.gram_on_rows()) {
        mode_n_product_into({x, u.rows * u.cols}, u.dims, w, u.index, {out, u.rows * u.cols});
        return;
    }
    const DenseMatrix m = materialize(u, x);
    DenseMatrix r(u.rows, u.cols);
    simd::gemm(Op::none, Op::none, u.rows, u.cols, s, 1.0, m.data().data(), u.rows, w.data, w.ld, 0.0,
               r.data().data(), u.rows);
    scatter(u, r, out);
}

void apply_factored(const Unfolding& u, const double* x, MatrixView v, std::span<const double> d, double* out) {
    const std::size_t s = u.gram_size();
    const std::size_t r = v.cols;
    if (v.rows != s || d.size() != r) throw InvalidArgument("apply_factored: operator size mismatch");
    if (r == 0) {
        std::fill_n(out, u.rows * u.cols, 0.0);
        return;
    }

    // diag(d) V^T, r x s
    DenseMatrix dvt(r, s);
    for (std::size_t j = 0; j < s; ++j)
        for (std::size_t i = 0; i < r; ++i) dvt(i, j) = d[i] * v(j, i);

    if (u.kind == Unfolding::Kind::mode && u.gram_on_rows()) {
        Dims mid = u.dims;
        mid[u.index - 1] = r;
        std::vector<double> t(numel(mid));
        mode_n_product_into({x, u.rows * u.cols}, u.dims, dvt.view(), u.index, t);
        mode_n_product_into(t, mid, v, u.index, {out, u.rows * u.cols});
        return;
    }

    DenseMatrix m;
    const double* a = x;
    if (u.kind == Unfolding::Kind::mode) {
        m = materialize(u, x);
        a = m.data().data();
    }
    DenseMatrix res;
    double* dst = out;
    if (u.kind == Unfolding::Kind::mode) {
        res = DenseMatrix(u.rows, u.cols);
        dst = res.data().data();
    }
    if (u.gram_on_rows()) {
        // T = diag(d) V^T A (r x cols); out = V T
        std::vector<double> t(r * u.cols);
        simd::gemm(Op::none, Op::none, r, u.cols, s, 1.0, dvt.data().data(), r, a, u.rows, 0.0, t.data(), r);
        simd::gemm(Op::none, Op::none, u.rows, u.cols, r, 1.0, v.data, v.ld, t.data(), r, 0.0, dst, u.rows);
    } else {
        // T = A V (rows x r); out = T diag(d) V^T
        std::vector<double> t(u.rows * r);
        simd::gemm(Op::none, Op::none, u.rows, r, s, 1.0, a, u.rows, v.data, v.ld, 0.0, t.data(), u.rows);
        simd::gemm(Op::none, Op::none, u.rows, u.cols, r, 1.0, t.data(), u.rows, dvt.data().data(), r, 0.0, dst,
                   u.rows);
    }
    if (u.kind == Unfolding::Kind::mode) scatter(u, res, out);
}

Subspace dominant_left(MatrixView a, const Truncation& t, Route route) {
    const std::size_t m = a.rows, n = a.cols;
    if (m == 0 || n == 0) throw InvalidArgument("dominant_left: empty matrix");
    double norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) norm2 += simd::sum_squares(m, a.data + j * a.ld);
    if (!std::isfinite(norm2)) throw InvalidInput("dominant_left: non-finite entries");

    Subspace out;
    if (!use_gram(route, m, n, t, std::sqrt(norm2))) {
        Svd f = svd(a);
        out.sigma = std::move(f.s);
        out.rank = choose_rank(out.sigma, t);
        out.basis = leading_columns(f.u, out.rank);
        return out;
    }

    const bool wide = m <= n;
    DenseMatrix g(wide ? m : n, wide ? m : n);
    if (wide)
        simd::syrk(Op::none, m, n, 1.0, a.data, a.ld, 0.0, g.data().data(), m);
    else
        simd::syrk(Op::transpose, n, m, 1.0, a.data, a.ld, 0.0, g.data().data(), n);
    SymEig e = sym_eig(g);
    out.sigma.resize(e.values.size());
    for (std::size_t i = 0; i < e.values.size(); ++i) out.sigma[i] = std::sqrt(std::max(e.values[i], 0.0));
    out.rank = choose_rank(out.sigma, t);

    if (wide) {
        out.basis = leading_columns(e.vectors, out.rank);
    } else {
        DenseMatrix av(m, out.rank);
        simd::gemm(Op::none, Op::none, m, out.rank, n, 1.0, a.data, a.ld, e.vectors.data().data(), n, 0.0,
                   av.data().data(), m);
        out.basis = orthonormal_columns(std::move(av));
    }
    normalize_signs(out.basis);
    return out;
}

Subspace dominant_left_mode(std::span<const double> x, std::span<const std::size_t> dims, std::size_t n,
                            const Truncation& t, Route route) {
    const Unfolding u = mode_unfolding(dims, n);
    if (x.size() != u.rows * u.cols) throw InvalidArgument("dominant_left_mode: buffer size mismatch");
    if (u.left == 1) return dominant_left({u.rows, u.cols, u.rows, x.data()}, t, route);

    const double norm = std::sqrt(simd::sum_squares(x.size(), x.data()));
    if (!std::isfinite(norm)) throw InvalidInput("dominant_left_mode: non-finite entries");
    if (!u.gram_on_rows() || !use_gram(route, u.rows, u.cols, t, norm)) {
        const DenseMatrix m = materialize(u, x.data());
        return dominant_left(m.view(), t, route);
    }

    DenseMatrix g;
    gram(u, x.data(), g);
    SymEig e = sym_eig(g);
    Subspace out;
    out.sigma.resize(e.values.size());
    for (std::size_t i = 0; i < e.values.size(); ++i) out.sigma[i] = std::sqrt(std::max(e.values[i], 0.0));
    out.rank = choose_rank(out.sigma, t);
    out.basis = leading_columns(e.vectors, out.rank);
    normalize_signs(out.basis);
    return out;
}

} // namespace despeckle::linalg
