#include "despeckle/admm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/linalg.hpp"
#include "despeckle/simd.hpp"

namespace despeckle {
namespace {

std::vector<double> normalized(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    for (double& x : v) x /= s;
    return v;
}

struct Solved {
    std::vector<double> z;
    AdmmTrace trace;
    std::vector<std::size_t> ranks;
};

// One solver for both variants; they differ only in the set of unfoldings and
// their weights. All iterates stay in tensor layout.
Solved run(const DenseTensor& x, const AdmmConfig& cfg, const std::vector<linalg::Unfolding>& unf,
           const std::vector<double>& weights) {
    cfg.validate();
    if (x.empty()) throw InvalidArgument("denoise: empty tensor");
    const std::size_t n = x.size();
    const std::size_t parts = unf.size();
    const double norm_x = std::sqrt(simd::sum_squares(n, x.data().data()));

    std::vector<double> z(x.data().begin(), x.data().end());
    std::vector<double> znew(n), operand(n);
    std::vector<std::vector<double>> lam(parts, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> m(parts, std::vector<double>(n));
    std::vector<std::size_t> ranks(parts, 0);

    Solved out;
    AdmmTrace& tr = out.trace;
    double mu = cfg.mu0;
    double eps = 1.1 * cfg.eps_r;
    std::size_t l = 0;
    while (eps > cfg.eps_r && l < cfg.itmax) {
        for (std::size_t k = 0; k < parts; ++k) {
            const double* op = z.data();
            if (l > 0) {
                simd::add_scaled(n, z.data(), 1.0 / mu, lam[k].data(), operand.data());
                op = operand.data();
            }
            const SvtStats st = svt_unfolded(unf[k], op, weights[k] / mu, cfg.norm, m[k].data());
            ranks[k] = st.rank;
            simd::multiplier_step(n, mu, weights[k], z.data(), m[k].data(), lam[k].data(), znew.data(), k > 0);
        }
        double residual = 0.0;
        for (std::size_t k = 0; k < parts; ++k)
            residual = std::max(residual, std::sqrt(simd::diff_sum_squares(n, znew.data(), m[k].data())));
        const double diff = std::sqrt(simd::diff_sum_squares(n, znew.data(), z.data()));
        const double znorm = std::sqrt(simd::sum_squares(n, znew.data()));
        if (!std::isfinite(diff) || !std::isfinite(znorm)) throw NumericalError("denoise: iterate became non-finite");
        eps = norm_x > 0.0 ? diff / norm_x : diff;

        tr.mu.push_back(mu);
        tr.rel_change.push_back(eps);
        tr.z_norm.push_back(znorm);
        tr.primal_residual.push_back(norm_x > 0.0 ? residual / norm_x : residual);

        mu = std::min(cfg.rho * mu, cfg.mu_max);
        z.swap(znew);
        ++l;
    }
    tr.iterations = l;
    tr.converged = eps <= cfg.eps_r;
    tr.mu_final = mu;
    out.z = std::move(z);
    out.ranks = std::move(ranks);
    return out;
}

} // namespace

AdmmConfig AdmmConfig::tt_defaults(SpNorm norm, double mu0, double mu_max) {
    AdmmConfig c;
    c.norm = norm;
    c.mu0 = mu0;
    c.mu_max = mu_max;
    c.eps_r = 1e-3;
    return c;
}

AdmmConfig AdmmConfig::ml_defaults(SpNorm norm, double mu0, double mu_max) {
    AdmmConfig c = tt_defaults(norm, mu0, mu_max);
    c.eps_r = 3e-3;
    return c;
}

void AdmmConfig::validate() const {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw InvalidArgument("mu0 must be positive");
    if (!(mu_max >= mu0) || !std::isfinite(mu_max)) throw InvalidArgument("mu_max must be finite and >= mu0");
    if (!(rho > 1.0) || !std::isfinite(rho)) throw InvalidArgument("rho must exceed 1");
    if (!(eps_r > 0.0)) throw InvalidArgument("eps_r must be positive");
    if (itmax == 0) throw InvalidArgument("itmax must be positive");
}

std::vector<double> tt_weights(std::span<const std::size_t> dims) {
    if (dims.size() < 2) throw InvalidArgument("tt_weights: order must be at least 2");
    std::vector<double> beta;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        double lo = 1.0, hi = 1.0;
        for (std::size_t l = 0; l < k; ++l) lo *= static_cast<double>(dims[l]);
        for (std::size_t l = k; l < dims.size(); ++l) hi *= static_cast<double>(dims[l]);
        beta.push_back(std::min(lo, hi));
    }
    return normalized(std::move(beta));
}

std::vector<double> ml_weights(std::span<const std::size_t> dims) {
    if (dims.size() < 2) throw InvalidArgument("ml_weights: order must be at least 2");
    std::vector<double> gamma;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        double rest = 1.0;
        for (std::size_t l = 0; l < dims.size(); ++l)
            if (l != k) rest *= static_cast<double>(dims[l]);
        gamma.push_back(std::min(static_cast<double>(dims[k]), rest));
    }
    return normalized(std::move(gamma));
}

TtDenoiseResult denoise_tt(const DenseTensor& x, const AdmmConfig& cfg) {
    const auto w = tt_weights(x.dims());
    std::vector<linalg::Unfolding> unf;
    for (std::size_t k = 1; k < x.order(); ++k) unf.push_back(linalg::canonical_unfolding(x.dims(), k));
    Solved s = run(x, cfg, unf, w);
    return {DenseTensor(x.dims(), std::move(s.z)), std::move(s.trace), TtRank{std::move(s.ranks)}};
}

MlDenoiseResult denoise_ml(const DenseTensor& x, const AdmmConfig& cfg) {
    const auto w = ml_weights(x.dims());
    std::vector<linalg::Unfolding> unf;
    for (std::size_t n = 1; n <= x.order(); ++n) unf.push_back(linalg::mode_unfolding(x.dims(), n));
    Solved s = run(x, cfg, unf, w);
    MlRank r{std::move(s.ranks), false};
    r.zero = std::any_of(r.ranks.begin(), r.ranks.end(), [](std::size_t v) { return v == 0; });
    return {DenseTensor(x.dims(), std::move(s.z)), std::move(s.trace), std::move(r)};
}

} // namespace despeckle
