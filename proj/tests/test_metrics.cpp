#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "despeckle/error.hpp"
#include "despeckle/metrics.hpp"
#include "oracles.hpp"

using namespace despeckle;

namespace {

SurfaceSet random_surfaces(std::size_t i2, std::size_t i3, std::size_t l, std::mt19937_64& rng) {
    SurfaceSet s(i2, i3, l);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (std::size_t b = 0; b < i3; ++b)
        for (std::size_t c = 0; c < i2; ++c) {
            double depth = 10.0;
            for (std::size_t k = 0; k < l; ++k) {
                depth += 1.0 + u(rng);
                s.at(c, b, k) = depth;
            }
        }
    return s;
}

template <class F>
DenseTensor mapped(const DenseTensor& x, F f) {
    std::vector<double> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = f(e);
    return DenseTensor(x.dims(), std::move(v));
}

RegionMask everything(const Dims& d) {
    RegionMask m(d);
    std::fill(m.inside.begin(), m.inside.end(), 1);
    return m;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("relative error examples") {
    std::mt19937_64 rng(3);
    const DenseTensor x = oracle::random_tensor({4, 3, 2}, rng);
    CHECK(relative_error(x, x) == 0.0);
    CHECK(relative_error(x, DenseTensor(x.dims())) == doctest::Approx(1.0).epsilon(1e-15));
    const DenseTensor a({2}, {3.0, 4.0}), b({2}, {3.0, 0.0});
    CHECK(relative_error(a, b) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK_THROWS_AS(relative_error(DenseTensor({2}), a), InvalidInput);
    CHECK_THROWS_AS(relative_error(a, DenseTensor({3})), InvalidArgument);
}

TEST_CASE("relative error is scale invariant") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const DenseTensor x = oracle::random_tensor({5, 4, 3}, rng), y = oracle::random_tensor({5, 4, 3}, rng);
        const double c = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
        const auto times = [c](double v) { return c * v; };
        const DenseTensor cx = mapped(x, times), cy = mapped(y, times);
        CHECK(relative_error(cx, cy) == doctest::Approx(relative_error(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("cnr examples") {
    const DenseTensor x({2, 1, 1}, {1.0, 3.0});
    CHECK(cnr(x, everything(x.dims())) == doctest::Approx(2.0).epsilon(1e-15));
    const DenseTensor flat({2, 2, 1}, {4.0, 4.0, 4.0, 4.0});
    CHECK_THROWS_AS(cnr(flat, everything(flat.dims())), InvalidInput);
    CHECK_THROWS_AS(cnr(x, RegionMask(x.dims())), InvalidInput);
}

TEST_CASE("cnr is scale invariant but not translation invariant") {
    std::mt19937_64 rng(8);
    const DenseTensor x({6, 5, 4}, oracle::random_vector(120, rng, 1.0, 2.0));
    const RegionMask m = box_mask(x.dims(), {1, 0, 1}, {5, 4, 3});
    const DenseTensor scaled = mapped(x, [](double v) { return 7.5 * v; });
    const DenseTensor shifted = mapped(x, [](double v) { return v + 1.0; });
    CHECK(cnr(scaled, m) == doctest::Approx(cnr(x, m)).epsilon(1e-12));
    CHECK(cnr(shifted, m) > cnr(x, m) * 1.1);
}

TEST_CASE("snr examples") {
    // Background {-1, 1}: population sd 1.
    const DenseTensor x({4, 1, 1}, {100.0, 5.0, -1.0, 1.0});
    RegionMask sig(x.dims()), bg(x.dims());
    sig.inside = {1, 1, 0, 0};
    bg.inside = {0, 0, 1, 1};
    CHECK(snr(x, sig, bg) == doctest::Approx(40.0).epsilon(1e-13));
    const DenseTensor y({3, 1, 1}, {1.0, -1.0, 1.0});
    RegionMask s2(y.dims()), b2(y.dims());
    s2.inside = {1, 0, 0};
    b2.inside = {0, 1, 1};
    CHECK(std::abs(snr(y, s2, b2)) < 1e-12);
    const DenseTensor flat({2, 1, 1}, {1.0, 1.0});
    RegionMask f1(flat.dims()), f2(flat.dims());
    f1.inside = {1, 0};
    f2.inside = {0, 1};
    CHECK_THROWS_AS(snr(flat, f1, f2), InvalidInput);
}

TEST_CASE("segmentation error examples") {
    std::mt19937_64 rng(11);
    const SurfaceSet manual = random_surfaces(7, 60, 8, rng);
    std::vector<std::size_t> subset;
    for (std::size_t i = 1; i <= 10; ++i) subset.push_back(6 * i);
    CHECK(segmentation_error(manual, manual, subset) == 0.0);

    SurfaceSet shifted = manual;
    for (std::size_t b = 0; b < 60; ++b)
        for (std::size_t c = 0; c < 7; ++c)
            for (std::size_t l = 0; l < 8; ++l) shifted.at(c, b, l) += manual.thickness(c, b) / 10.0;
    CHECK(segmentation_error(shifted, manual, subset) == doctest::Approx(0.1).epsilon(1e-12));

    // Normalization I2 * |S| * L: one perturbed cell of size T contributes 1/(7*10*8).
    SurfaceSet one = manual;
    one.at(3, 11, 5) += manual.thickness(3, 11);
    CHECK(segmentation_error(one, manual, subset) == doctest::Approx(1.0 / (7 * 10 * 8)).epsilon(1e-12));
    CHECK(segmentation_error(one, manual, {1, 2}) == 0.0);

    CHECK_THROWS_AS(segmentation_error(SurfaceSet(7, 60, 7), manual, subset), InvalidArgument);
    CHECK_THROWS_AS(segmentation_error(manual, manual, {61}), InvalidArgument);
}

TEST_CASE("segmentation error is translation invariant") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 10; ++t) {
        const SurfaceSet a = random_surfaces(5, 12, 4, rng), m = random_surfaces(5, 12, 4, rng);
        const double d = std::uniform_real_distribution<double>(-20.0, 20.0)(rng);
        SurfaceSet a2 = a, m2 = m;
        for (auto& v : a2.position) v += d;
        for (auto& v : m2.position) v += d;
        const std::vector<std::size_t> s{1, 4, 12};
        CHECK(segmentation_error(a2, m2, s) == doctest::Approx(segmentation_error(a, m, s)).epsilon(1e-10));
    }
}

TEST_CASE("alignment examples") {
    std::mt19937_64 rng(13);
    const DenseTensor x = oracle::random_tensor({20, 6, 5}, rng);
    const std::vector<std::vector<double>> equal(5, {8.0, 8.0, 8.0});
    const DenseTensor same = align_bscans(x, equal);
    CHECK(oracle::max_abs_diff(same.data(), x.data()) == 0.0);

    // One B-scan sits 5 rows low and one 5 rows high; the reference stays at 8.
    std::vector<std::vector<double>> h(5, {8.0, 8.0});
    h[2] = {13.0, 13.0};
    h[3] = {3.0, 3.0};
    const std::vector<long> s = alignment_shifts(20, h);
    CHECK(s == std::vector<long>{0, 0, -5, 5, 0});
    const DenseTensor y = align_bscans(x, h);
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t r = 0; r < 20; ++r) {
            CHECK(y({r, c, 0}) == x({r, c, 0}));
            CHECK(y({r, c, 2}) == (r + 5 < 20 ? x({r + 5, c, 2}) : 0.0));
            CHECK(y({r, c, 3}) == (r >= 5 ? x({r - 5, c, 3}) : 0.0));
        }

    std::vector<std::vector<double>> far(5, {1.0});
    far[0] = {100.0};
    CHECK_THROWS_AS(align_bscans(x, far), InvalidArgument);
    CHECK_THROWS_AS(align_bscans(x, std::vector<std::vector<double>>(4, {1.0})), InvalidArgument);
    std::vector<std::vector<double>> missing(5, {1.0});
    missing[1].clear();
    CHECK_THROWS_AS(align_bscans(x, missing), InvalidArgument);
}

TEST_CASE("alignment is idempotent") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(2.0, 12.0);
    for (int t = 0; t < 10; ++t) {
        const DenseTensor x = oracle::random_tensor({24, 5, 6}, rng);
        std::vector<std::vector<double>> h(6);
        for (auto& row : h) row = {u(rng), u(rng), u(rng)};
        const std::vector<long> s = alignment_shifts(24, h);
        const DenseTensor once = align_bscans(x, h);
        std::vector<std::vector<double>> moved = h;
        for (std::size_t b = 0; b < 6; ++b)
            for (auto& v : moved[b]) v += static_cast<double>(s[b]);
        const DenseTensor twice = align_bscans(once, moved);
        CHECK(oracle::max_abs_diff(twice.data(), once.data()) == 0.0);
    }
}

TEST_CASE("mask csv") {
    std::istringstream in("i1,i2,i3\n# comment\n1,1,1\n3,2,2\n\n");
    const RegionMask m = read_mask_csv(in, {3, 2, 2});
    CHECK(m.count() == 2);
    CHECK(m.inside[0] == 1);
    CHECK(m.inside[2 + 3 * (1 + 2 * 1)] == 1);
    std::istringstream bad("1,1\n");
    CHECK_THROWS_AS(read_mask_csv(bad, {3, 2, 2}), FormatError);
    std::istringstream range("4,1,1\n");
    CHECK_THROWS_AS(read_mask_csv(range, {3, 2, 2}), FormatError);
    std::istringstream junk("1,1,x\n");
    CHECK_THROWS_AS(read_mask_csv(junk, {3, 2, 2}), FormatError);
}

TEST_CASE("surface csv") {
    std::ostringstream out;
    out << "i2,i3,l,position\n";
    for (int l = 1; l <= 2; ++l)
        for (int b = 1; b <= 3; ++b)
            for (int c = 1; c <= 2; ++c) out << c << ',' << b << ',' << l << ',' << 10 * l + b + 0.5 * c << '\n';
    std::istringstream in(out.str());
    const SurfaceSet s = read_surfaces_csv(in);
    CHECK(s.bscan_width == 2);
    CHECK(s.bscans == 3);
    CHECK(s.surfaces == 2);
    CHECK(s.at(1, 2, 1) == 24.0);
    CHECK(s.thickness(0, 0) == 10.0);

    std::istringstream gap("1,1,1,5\n2,1,1,5\n1,2,1,5\n");
    CHECK_THROWS_AS(read_surfaces_csv(gap), FormatError);
    std::istringstream dup("1,1,1,5\n1,1,1,6\n");
    CHECK_THROWS_AS(read_surfaces_csv(dup), FormatError);
    std::istringstream huge("1e300,1,1,5\n");
    CHECK_THROWS_AS(read_surfaces_csv(huge), FormatError);
}

}
