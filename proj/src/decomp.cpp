#include "despeckle/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/linalg.hpp"
#include "despeckle/simd.hpp"

namespace despeckle {
namespace {

using simd::Op;

double product(const Dims& d, std::size_t from, std::size_t to) {
    double p = 1.0;
    for (std::size_t i = from; i < to; ++i) p *= static_cast<double>(d[i]);
    return p;
}

void require_tensor(const DenseTensor& x, const char* who) {
    if (x.empty()) throw InvalidArgument(std::string(who) + ": empty tensor");
    if (x.order() < 2) throw InvalidArgument(std::string(who) + ": order must be at least 2");
}

// Sequential sweep: at step k the carried matrix is (R_{k-1} I_k) x (I_{k+1}..I_N).
TTModel tt_sweep(const DenseTensor& x, const std::vector<linalg::Truncation>& steps) {
    const Dims& d = x.dims();
    const std::size_t n = d.size();
    TTModel m;
    m.dims = d;
    std::vector<double> carry(x.data().begin(), x.data().end());
    std::size_t r_prev = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const std::size_t rows = r_prev * d[k];
        const std::size_t cols = carry.size() / rows;
        const MatrixView c{rows, cols, rows, carry.data()};
        linalg::Subspace s = linalg::dominant_left(c, steps[k]);
        const std::size_t r = s.rank;
        std::vector<double> next(r * cols);
        simd::gemm(Op::transpose, Op::none, r, cols, rows, 1.0, s.basis.data().data(), rows, carry.data(), rows,
                   0.0, next.data(), r);
        m.cores.emplace_back(Dims{r_prev, d[k], r}, std::move(s.basis).release());
        carry = std::move(next);
        r_prev = r;
    }
    m.cores.emplace_back(Dims{r_prev, d[n - 1], 1}, std::move(carry));
    return m;
}

void check_tucker_ranks(const Dims& d, const std::vector<std::size_t>& ranks) {
    if (ranks.size() != d.size()) throw InvalidArgument("tucker: need one rank per mode");
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double bound = std::min(static_cast<double>(d[i]), product(d, 0, d.size()) / d[i]);
        if (ranks[i] < 1 || static_cast<double>(ranks[i]) > bound)
            throw InvalidArgument("tucker: rank " + std::to_string(i + 1) + " out of bounds");
    }
}

// x times A_m^T on every mode except `skip` (0-based; pass N to include all).
DenseTensor project(const DenseTensor& x, const std::vector<DenseMatrix>& a, std::size_t skip) {
    DenseTensor y = x;
    for (std::size_t m = 0; m < a.size(); ++m)
        if (m != skip) y = mode_n_product(y, a[m].transposed(), m + 1);
    return y;
}

} // namespace

std::vector<std::size_t> TTModel::ranks() const {
    std::vector<std::size_t> r;
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) r.push_back(cores[k].dim(2));
    return r;
}

std::size_t TTModel::parameter_count() const {
    std::size_t p = 0;
    for (const auto& c : cores) p += c.size();
    return p;
}

void TTModel::validate() const {
    if (dims.size() < 2 || cores.size() != dims.size()) throw InvalidArgument("TT model: core count mismatch");
    for (std::size_t k = 0; k < cores.size(); ++k) {
        const DenseTensor& c = cores[k];
        if (c.order() != 3 || c.dim(1) != dims[k]) throw InvalidArgument("TT model: core shape mismatch");
        if (k == 0 && c.dim(0) != 1) throw InvalidArgument("TT model: R_0 must be 1");
        if (k + 1 == cores.size() && c.dim(2) != 1) throw InvalidArgument("TT model: R_N must be 1");
        if (k > 0 && cores[k - 1].dim(2) != c.dim(0)) throw InvalidArgument("TT model: adjacent ranks disagree");
    }
}

Dims TuckerModel::dims() const {
    Dims d;
    for (const auto& f : factors) d.push_back(f.rows());
    return d;
}

std::vector<std::size_t> TuckerModel::ranks() const { return core.dims(); }

std::size_t TuckerModel::parameter_count() const {
    std::size_t p = core.size();
    for (const auto& f : factors) p += f.size();
    return p;
}

void TuckerModel::validate() const {
    if (factors.size() != core.order() || factors.empty()) throw InvalidArgument("Tucker model: factor count mismatch");
    for (std::size_t n = 0; n < factors.size(); ++n)
        if (factors[n].cols() != core.dim(n) || factors[n].cols() > factors[n].rows())
            throw InvalidArgument("Tucker model: factor shape mismatch");
}

TTModel tt_svd_eps(const DenseTensor& x, double eps) {
    require_tensor(x, "tt_svd_eps");
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("tt_svd_eps: eps must lie in (0, 1)");
    const double delta = eps * frobenius_norm(x) / std::sqrt(static_cast<double>(x.order() - 1));
    std::vector<linalg::Truncation> steps(x.order() - 1);
    for (auto& s : steps) s.tail_budget = delta;
    return tt_sweep(x, steps);
}

TTModel tt_svd_ranks(const DenseTensor& x, const std::vector<std::size_t>& ranks) {
    require_tensor(x, "tt_svd_ranks");
    const Dims& d = x.dims();
    if (ranks.size() + 1 != d.size()) throw InvalidArgument("tt_svd_ranks: need N-1 ranks");
    std::vector<linalg::Truncation> steps(ranks.size());
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        const double bound = std::min(product(d, 0, k + 1), product(d, k + 1, d.size()));
        if (ranks[k] < 1 || static_cast<double>(ranks[k]) > bound)
            throw InvalidArgument("tt_svd_ranks: rank " + std::to_string(k + 1) + " out of bounds");
        steps[k].max_rank = ranks[k];
    }
    return tt_sweep(x, steps);
}

DenseTensor tt_reconstruct(const TTModel& m) {
    m.validate();
    // Running (I_1..I_k) x R_k matrix times the next core as R_k x (I_{k+1} R_{k+1}).
    std::vector<double> acc(m.cores[0].data().begin(), m.cores[0].data().end());
    std::size_t rows = m.dims[0];
    for (std::size_t k = 1; k < m.cores.size(); ++k) {
        const DenseTensor& c = m.cores[k];
        const std::size_t r = c.dim(0), cols = c.dim(1) * c.dim(2);
        std::vector<double> next(rows * cols);
        simd::gemm(Op::none, Op::none, rows, cols, r, 1.0, acc.data(), rows, c.data().data(), r, 0.0, next.data(),
                   rows);
        acc = std::move(next);
        rows *= c.dim(1);
    }
    return DenseTensor(m.dims, std::move(acc));
}

TuckerModel tucker_als(const DenseTensor& x, const std::vector<std::size_t>& ranks, const TuckerOptions& opt) {
    require_tensor(x, "tucker_als");
    check_tucker_ranks(x.dims(), ranks);
    if (!(opt.tol > 0.0)) throw InvalidArgument("tucker_als: tol must be positive");
    const std::size_t n = x.order();
    const double norm_x = frobenius_norm(x);

    std::vector<DenseMatrix> a(n);
    for (std::size_t m = 0; m < n; ++m) {
        linalg::Truncation t;
        t.max_rank = ranks[m];
        a[m] = linalg::dominant_left_mode(x.data(), x.dims(), m + 1, t).basis;
    }
    // With orthonormal factors ||x - G x A||^2 = ||x||^2 - ||G||^2.
    auto fit_of = [&](const DenseTensor& core) {
        if (norm_x == 0.0) return 1.0;
        const double g = frobenius_norm(core);
        return 1.0 - std::sqrt(std::max(norm_x * norm_x - g * g, 0.0)) / norm_x;
    };

    DenseTensor core = project(x, a, n);
    double fit = fit_of(core);
    if (opt.observer) opt.observer({0, fit, &a});
    for (std::size_t sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        for (std::size_t m = 0; m < n; ++m) {
            const DenseTensor y = project(x, a, m);
            linalg::Truncation t;
            t.max_rank = ranks[m];
            a[m] = linalg::dominant_left_mode(y.data(), y.dims(), m + 1, t).basis;
        }
        core = project(x, a, n);
        const double next = fit_of(core);
        if (opt.observer) opt.observer({sweep, next, &a});
        const bool done = std::abs(next - fit) < opt.tol;
        fit = next;
        if (done) break;
    }
    return {std::move(core), std::move(a)};
}

DenseTensor tucker_reconstruct(const TuckerModel& m) {
    m.validate();
    DenseTensor y = m.core;
    for (std::size_t k = 0; k < m.factors.size(); ++k) y = mode_n_product(y, m.factors[k], k + 1);
    return y;
}

} // namespace despeckle
