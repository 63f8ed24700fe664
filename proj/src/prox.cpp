#include "despeckle/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/simd.hpp"

namespace despeckle {
namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("threshold tau must be positive and finite");
}

double objective(double u, double x, double tau, SpNorm norm) {
    const double d = u - x;
    return 0.5 * d * d + penalty(u, tau, norm);
}

// Half thresholding; lambda = 2*tau because the quadratic carries a 1/2.
double prox_half(double x, double tau) {
    const double ax = std::abs(x);
    if (ax <= prox_threshold(tau, SpNorm::s12)) return 0.0;
    const double phi = std::acos((tau / 4.0) * std::pow(ax / 3.0, -1.5));
    return (2.0 / 3.0) * x * (1.0 + std::cos(2.0 * std::numbers::pi / 3.0 - (2.0 / 3.0) * phi));
}

double prox_two_thirds(double x, double tau) {
    const double ax = std::abs(x);
    if (ax <= prox_threshold(tau, SpNorm::s23)) return 0.0;
    const double lam = 2.0 * tau;
    const double a = std::acosh(27.0 * x * x / 16.0 * std::pow(lam, -1.5));
    const double c = 2.0 / std::sqrt(3.0) * std::pow(lam, 0.25) * std::sqrt(std::cosh(a / 3.0));
    const double r = (c + std::sqrt(std::max(2.0 * ax / c - c * c, 0.0))) / 2.0;
    return std::copysign(r * r * r, x);
}

} // namespace

double p_value(SpNorm norm) noexcept {
    switch (norm) {
    case SpNorm::s0: return 0.0;
    case SpNorm::s12: return 0.5;
    case SpNorm::s23: return 2.0 / 3.0;
    case SpNorm::s1: return 1.0;
    }
    return 1.0;
}

SpNorm norm_from_p(double p) {
    for (SpNorm n : kAllNorms)
        if (std::abs(p - p_value(n)) <= 1e-12) return n;
    throw InvalidArgument("p must be one of 0, 1/2, 2/3, 1");
}

const char* to_string(SpNorm norm) noexcept {
    switch (norm) {
    case SpNorm::s0: return "s0";
    case SpNorm::s12: return "s12";
    case SpNorm::s23: return "s23";
    case SpNorm::s1: return "s1";
    }
    return "?";
}

std::optional<SpNorm> parse_norm(std::string_view name) noexcept {
    for (SpNorm n : kAllNorms)
        if (name == to_string(n)) return n;
    return std::nullopt;
}

double penalty(double u, double tau, SpNorm norm) {
    switch (norm) {
    case SpNorm::s0: return u != 0.0 ? tau : 0.0;
    case SpNorm::s12: return tau * std::sqrt(std::abs(u));
    case SpNorm::s23: return tau * std::cbrt(u * u);
    case SpNorm::s1: return tau * std::abs(u);
    }
    return 0.0;
}

double prox_threshold(double tau, SpNorm norm) {
    check_tau(tau);
    switch (norm) {
    case SpNorm::s0: return std::sqrt(2.0 * tau);
    case SpNorm::s12: return 1.5 * std::pow(tau, 2.0 / 3.0);
    case SpNorm::s23: {
        const double lam = 2.0 * tau;
        return (2.0 / 3.0) * std::pow(3.0 * lam * lam * lam, 0.25);
    }
    case SpNorm::s1: return tau;
    }
    return tau;
}

double prox_scalar(double x, double tau, SpNorm norm) {
    check_tau(tau);
    switch (norm) {
    case SpNorm::s0: return std::abs(x) > std::sqrt(2.0 * tau) ? x : 0.0;
    case SpNorm::s12: return prox_half(x, tau);
    case SpNorm::s23: return prox_two_thirds(x, tau);
    case SpNorm::s1: {
        const double m = std::abs(x) - tau;
        return m > 0.0 ? std::copysign(m, x) : 0.0;
    }
    }
    return 0.0;
}

double prox_oracle(double x, double tau, SpNorm norm) {
    check_tau(tau);
    if (x == 0.0) return 0.0;
    const double lo = -std::abs(x) - 1.0;
    const double hi = std::abs(x) + 1.0;
    constexpr int kGrid = 20000;
    const double h = (hi - lo) / kGrid;

    double best_u = 0.0;
    double best_f = objective(0.0, x, tau, norm);
    for (int i = 0; i <= kGrid; ++i) {
        const double u = lo + h * i;
        const double f = objective(u, x, tau, norm);
        if (f < best_f) {
            best_f = f;
            best_u = u;
        }
    }
    if (best_u == 0.0) return 0.0;

    // Golden-section search on the bracket around the best grid point, kept on
    // one side of the origin where the objective is smooth.
    double a = best_u - h, b = best_u + h;
    if (best_u > 0.0) a = std::max(a, 0.0);
    else b = std::min(b, 0.0);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c, x, tau, norm), fd = objective(d, x, tau, norm);
    for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c, x, tau, norm);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d, x, tau, norm);
        }
    }
    const double u = 0.5 * (a + b);
    return objective(u, x, tau, norm) < objective(0.0, x, tau, norm) ? u : 0.0;
}

SvtResult svt(const DenseMatrix& m, double tau, SpNorm norm) {
    check_tau(tau);
    SvtResult out;
    out.matrix = DenseMatrix(m.rows(), m.cols());
    if (m.size() == 0) return out;
    for (double v : m.data())
        if (!std::isfinite(v)) throw InvalidInput("svt: non-finite entries");

    const linalg::Svd f = linalg::svd(m.view());
    const double cut = f.s.empty() ? 0.0 : 1e-12 * f.s.front();
    std::vector<double> t(f.s.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = prox_scalar(f.s[i], tau, norm);
        if (t[i] <= cut) t[i] = 0.0;
    }
    out.rank = static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](double v) { return v > 0.0; }));
    out.singular_values = t;

    for (std::size_t r = 0; r < t.size(); ++r) {
        if (t[r] == 0.0) continue;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double s = t[r] * f.vt(r, j);
            for (std::size_t i = 0; i < m.rows(); ++i) out.matrix(i, j) += f.u(i, r) * s;
        }
    }
    return out;
}

SvtStats svt_unfolded(const linalg::Unfolding& u, const double* x, double tau, SpNorm norm, double* out) {
    check_tau(tau);
    DenseMatrix g;
    linalg::gram(u, x, g);
    const double phi = prox_threshold(tau, norm);
    const linalg::SymEig e = linalg::sym_eig_above(g, phi * phi);

    SvtStats stats;
    std::vector<double> w;
    const double sigma_max = e.values.empty() ? 0.0 : std::sqrt(e.values.front());
    for (std::size_t i = 0; i < e.values.size(); ++i) {
        const double sigma = std::sqrt(e.values[i]);
        const double t = prox_scalar(sigma, tau, norm);
        if (t <= 1e-12 * sigma_max) break;
        stats.singular_values.push_back(t);
        w.push_back(t / sigma);
    }
    stats.rank = w.size();

    const std::size_t s = u.gram_size();
    const std::size_t r = stats.rank;
    const MatrixView v{s, r, s, e.vectors.data().data()};
    if (2 * r < s) {
        linalg::apply_factored(u, x, v, w, out);
        return stats;
    }
    // W = V diag(w) V^T
    DenseMatrix vw(s, r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < s; ++i) vw(i, j) = v(i, j) * w[j];
    DenseMatrix wm(s, s);
    simd::gemm(simd::Op::none, simd::Op::transpose, s, s, r, 1.0, vw.data().data(), s, v.data, s, 0.0,
               wm.data().data(), s);
    linalg::apply(u, x, wm.view(), out);
    return stats;
}

} // namespace despeckle
