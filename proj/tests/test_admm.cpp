#include "doctest.h"

#include <cmath>
#include <random>

#include "despeckle/admm.hpp"
#include "despeckle/error.hpp"
#include "oracles.hpp"

using namespace despeckle;

namespace {

// Low-rank positive signal times unit-mean gamma speckle.
DenseTensor speckled(const Dims& dims, std::mt19937_64& rng) {
    DenseTensor clean = oracle::tucker_tensor(dims, {3, 3, 2}, rng);
    std::vector<double> v(clean.data().begin(), clean.data().end());
    double lo = 0;
    for (double x : v) lo = std::min(lo, x);
    std::gamma_distribution<double> g(4.0, 0.25);
    for (double& x : v) x = (x - lo + 0.5) * g(rng);
    return DenseTensor(dims, v);
}

// Straightforward ADMM on explicit unfoldings with the exact-SVD thresholding.
DenseTensor reference_admm(const DenseTensor& x, double mu0, double mu_max, double rho, std::size_t iters,
                           SpNorm norm, bool tt) {
    const Dims& d = x.dims();
    const std::size_t parts = tt ? d.size() - 1 : d.size();
    std::vector<double> w(parts);
    double total = 0;
    for (std::size_t k = 0; k < parts; ++k) {
        double a = 1, b = 1;
        if (tt) {
            for (std::size_t l = 0; l <= k; ++l) a *= d[l];
            for (std::size_t l = k + 1; l < d.size(); ++l) b *= d[l];
        } else {
            a = d[k];
            for (std::size_t l = 0; l < d.size(); ++l)
                if (l != k) b *= d[l];
        }
        w[k] = std::min(a, b);
        total += w[k];
    }
    for (double& v : w) v /= total;

    auto unfold = [&](const std::vector<double>& t, std::size_t k) {
        DenseTensor tt_(d, t);
        return tt ? unfold_canonical(tt_, k + 1) : unfold_mode_n(tt_, k + 1);
    };
    auto fold = [&](const DenseMatrix& m, std::size_t k) {
        return tt ? fold_canonical(m, d, k + 1) : fold_mode_n(m, d, k + 1);
    };

    std::vector<double> z(x.data().begin(), x.data().end());
    std::vector<std::vector<double>> lam(parts, std::vector<double>(z.size(), 0.0));
    double mu = mu0;
    for (std::size_t l = 0; l < iters; ++l) {
        std::vector<double> next(z.size(), 0.0);
        for (std::size_t k = 0; k < parts; ++k) {
            std::vector<double> op(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) op[i] = z[i] + lam[k][i] / mu;
            const DenseTensor m = fold(svt(unfold(op, k), w[k] / mu, norm).matrix, k);
            for (std::size_t i = 0; i < z.size(); ++i) {
                lam[k][i] += mu * (z[i] - m.data()[i]);
                next[i] += w[k] * m.data()[i];
            }
        }
        mu = std::min(rho * mu, mu_max);
        z = next;
    }
    return DenseTensor(d, z);
}

} // namespace

TEST_SUITE("admm") {

TEST_CASE("weight examples") {
    const Dims oct{480, 512, 64};
    auto a = tt_weights(oct);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == doctest::Approx(480.0 / 544.0).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(64.0 / 544.0).epsilon(1e-15));
    CHECK(tt_weights(Dims{2, 2}) == std::vector<double>{1.0});
    auto c = tt_weights(Dims{4, 4, 4});
    CHECK(c[0] == 0.5);
    CHECK(c[1] == 0.5);

    auto d = ml_weights(oct);
    REQUIRE(d.size() == 3);
    CHECK(d[0] == doctest::Approx(480.0 / 1056.0).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(512.0 / 1056.0).epsilon(1e-15));
    CHECK(d[2] == doctest::Approx(64.0 / 1056.0).epsilon(1e-15));
    for (double v : ml_weights(Dims{7, 7, 7})) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    auto e = ml_weights(Dims{2, 1000});
    CHECK(e[0] == 0.5);
    CHECK(e[1] == 0.5);

    CHECK_THROWS_AS(tt_weights(Dims{5}), InvalidArgument);
    CHECK_THROWS_AS(ml_weights(Dims{5}), InvalidArgument);
}

TEST_CASE("weights are normalized") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> u(1, 40);
    for (int t = 0; t < 200; ++t) {
        Dims d(2 + t % 4);
        for (auto& v : d) v = u(rng);
        for (const auto& w : {tt_weights(d), ml_weights(d)}) {
            double s = 0;
            for (double v : w) {
                CHECK(v > 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-15);
        }
    }
}

TEST_CASE("config validation") {
    CHECK_NOTHROW(AdmmConfig::tt_defaults(SpNorm::s1, 1.0, 10.0).validate());
    CHECK(AdmmConfig::tt_defaults(SpNorm::s1, 1.0, 10.0).eps_r == 1e-3);
    CHECK(AdmmConfig::ml_defaults(SpNorm::s1, 1.0, 10.0).eps_r == 3e-3);
    CHECK(AdmmConfig::ml_defaults(SpNorm::s1, 1.0, 10.0).rho == 1.1);
    CHECK(AdmmConfig::ml_defaults(SpNorm::s1, 1.0, 10.0).itmax == 100);
    auto bad = [](auto edit) {
        AdmmConfig c = AdmmConfig::tt_defaults(SpNorm::s1, 1.0, 10.0);
        edit(c);
        return c;
    };
    CHECK_THROWS_AS(bad([](AdmmConfig& c) { c.mu0 = 0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](AdmmConfig& c) { c.mu_max = 0.5; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](AdmmConfig& c) { c.rho = 1.0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](AdmmConfig& c) { c.eps_r = 0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](AdmmConfig& c) { c.itmax = 0; }).validate(), InvalidArgument);
    DenseTensor x(Dims{3, 3, 3});
    CHECK_THROWS_AS(denoise_tt(x, bad([](AdmmConfig& c) { c.rho = 0.9; })), InvalidArgument);
    CHECK_THROWS_AS(denoise_ml(x, bad([](AdmmConfig& c) { c.mu0 = -1; })), InvalidArgument);
}

TEST_CASE("iterates match a reference ADMM on explicit unfoldings") {
    std::mt19937_64 rng(11);
    const Dims d{9, 7, 6};
    const DenseTensor x = speckled(d, rng);
    for (SpNorm n : kAllNorms)
        for (bool tt : {true, false}) {
            AdmmConfig c = AdmmConfig::tt_defaults(n, 0.05, 0.4);
            c.itmax = 6;
            c.eps_r = 1e-300;
            const DenseTensor got = tt ? denoise_tt(x, c).denoised : denoise_ml(x, c).denoised;
            const DenseTensor want = reference_admm(x, c.mu0, c.mu_max, c.rho, c.itmax, n, tt);
            CAPTURE(to_string(n));
            CAPTURE(tt);
            CHECK(oracle::rel_diff(got.data(), want.data()) <= 1e-9);
        }
}

TEST_CASE("exactly low TT rank input passes through") {
    std::mt19937_64 rng(5);
    const DenseTensor x = oracle::tt_tensor(Dims{8, 9, 10}, {2, 3}, rng);
    const auto r = denoise_tt(x, AdmmConfig::tt_defaults(SpNorm::s1, 1e6, 1e7));
    CHECK(oracle::rel_diff(r.denoised.data(), x.data()) <= 1e-6);
    CHECK(r.ranks.ranks == std::vector<std::size_t>{2, 3});
}

TEST_CASE("zero tensor stays zero") {
    const DenseTensor x(Dims{6, 5, 4});
    const auto a = denoise_tt(x, AdmmConfig::tt_defaults(SpNorm::s12, 1.0, 100.0));
    CHECK(a.denoised == x);
    CHECK(a.trace.converged);
    CHECK(a.trace.iterations <= 2);
    const auto b = denoise_ml(x, AdmmConfig::ml_defaults(SpNorm::s0, 1.0, 100.0));
    CHECK(b.denoised == x);
    CHECK(b.trace.iterations <= 2);
    CHECK(b.ranks.zero);
    CHECK(b.ranks.ranks == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("exact ML rank (2,2,2) is recovered") {
    std::mt19937_64 rng(17);
    const DenseTensor x = oracle::tucker_tensor(Dims{10, 11, 12}, {2, 2, 2}, rng);
    const auto r = denoise_ml(x, AdmmConfig::ml_defaults(SpNorm::s1, 50.0, 5e4));
    CHECK(r.ranks.ranks == std::vector<std::size_t>{2, 2, 2});
    CHECK_FALSE(r.ranks.zero);
}

TEST_CASE("large thresholds collapse the output") {
    std::mt19937_64 rng(23);
    const DenseTensor x = oracle::random_tensor(Dims{7, 8, 9}, rng);
    for (bool tt : {true, false}) {
        AdmmConfig c = AdmmConfig::tt_defaults(SpNorm::s1, 1e-3, 1e-2);
        const AdmmTrace tr = tt ? denoise_tt(x, c).trace : denoise_ml(x, c).trace;
        CHECK(tr.z_norm.front() == 0.0);
        CHECK(tr.z_norm.back() == 0.0);
    }
    const auto m = denoise_ml(x, AdmmConfig::ml_defaults(SpNorm::s1, 1e-3, 1e-2));
    CHECK(m.ranks.zero);
    for (double v : m.denoised.data()) CHECK(v == 0.0);
}

TEST_CASE("trace properties on speckled inputs") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 3; ++trial) {
        const DenseTensor x = speckled(Dims{24, 20, 8}, rng);
        const double nx = oracle::frob(x);
        for (SpNorm n : kAllNorms)
            for (bool tt : {true, false}) {
                const double mu0 = 0.02 * (trial + 1);
                AdmmConfig c = tt ? AdmmConfig::tt_defaults(n, mu0, 1e3 * mu0) : AdmmConfig::ml_defaults(n, mu0, 1e3 * mu0);
                const AdmmTrace tr = tt ? denoise_tt(x, c).trace : denoise_ml(x, c).trace;
                CAPTURE(to_string(n));
                CAPTURE(tt);
                CHECK(tr.rel_change.size() == tr.iterations);
                CHECK(tr.mu.size() == tr.iterations);
                CHECK(tr.mu.front() == c.mu0);
                for (std::size_t l = 1; l < tr.mu.size(); ++l) CHECK(tr.mu[l] >= tr.mu[l - 1]);
                for (double m : tr.mu) CHECK(m <= c.mu_max);
                CHECK(tr.mu_final <= c.mu_max);
                for (double z : tr.z_norm) CHECK(z <= 2.0 * nx);
                CHECK(tr.converged == (tr.rel_change.back() <= c.eps_r));
                if (tr.converged) CHECK(tr.primal_residual.back() <= 10.0 * c.eps_r);
            }
    }
}

TEST_CASE("speckled input converges within the iteration budget") {
    std::mt19937_64 rng(31);
    const DenseTensor x = speckled(Dims{64, 64, 16}, rng);
    const auto a = denoise_tt(x, AdmmConfig::tt_defaults(SpNorm::s1, 0.01, 10.0));
    CHECK(a.trace.converged);
    CHECK(a.trace.iterations <= 100);
    const auto b = denoise_ml(x, AdmmConfig::ml_defaults(SpNorm::s1, 0.01, 10.0));
    CHECK(b.trace.converged);
}

TEST_CASE("runs are bitwise deterministic") {
    std::mt19937_64 rng(37);
    const DenseTensor x = speckled(Dims{20, 18, 6}, rng);
    AdmmConfig c = AdmmConfig::tt_defaults(SpNorm::s23, 0.05, 50.0);
    CHECK(denoise_tt(x, c).denoised == denoise_tt(x, c).denoised);
    CHECK(denoise_ml(x, c).denoised == denoise_ml(x, c).denoised);
}

}
