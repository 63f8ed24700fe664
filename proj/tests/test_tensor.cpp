#include "doctest.h"

#include <cmath>
#include <random>

#include "despeckle/error.hpp"
#include "despeckle/tensor.hpp"
#include "oracles.hpp"

using namespace despeckle;

TEST_SUITE("tensor") {

TEST_CASE("construction validates shape and finiteness") {
    CHECK_THROWS_AS(DenseTensor(Dims{}), InvalidArgument);
    CHECK_THROWS_AS(DenseTensor(Dims{2, 0, 3}), InvalidArgument);
    CHECK_THROWS_AS(DenseTensor(Dims{2, 2}, std::vector<double>(3)), InvalidArgument);
    CHECK_THROWS_AS(DenseTensor(Dims{2}, {1.0, NAN}), InvalidInput);
    CHECK_THROWS_AS(DenseTensor(Dims{2}, {1.0, INFINITY}), InvalidInput);
    const DenseTensor t(Dims{2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t({1, 2}) == 6);
    CHECK(t({1, 0}) == 2);
    CHECK_THROWS_AS(t({2, 0}), InvalidArgument);
}

TEST_CASE("mode-n unfolding of a matrix along mode 1 is the matrix itself") {
    const DenseTensor t(Dims{2, 2}, {1, 2, 3, 4});
    const DenseMatrix m = unfold_mode_n(t, 1);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(std::vector<double>(m.data().begin(), m.data().end()) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("mode-2 unfolding of a 2x3x4 tensor follows the index map") {
    std::mt19937_64 rng(1);
    const Dims d{2, 3, 4};
    const DenseTensor t = oracle::random_tensor(d, rng);
    const DenseMatrix m = unfold_mode_n(t, 2);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 8);
    std::vector<std::size_t> idx(3, 0);
    do {
        CHECK(m(idx[1], oracle::mode_n_column(idx, d, 2)) == t(idx));
    } while (oracle::next_index(idx, d));
}

TEST_CASE("mode-3 unfolding of a 480x512x64 volume has shape 64 x 245760") {
    const DenseTensor t(Dims{480, 512, 64});
    const DenseMatrix m = unfold_mode_n(t, 3);
    CHECK(m.rows() == 64);
    CHECK(m.cols() == 245760);
}

TEST_CASE("mode and split indices are range-checked") {
    const DenseTensor t(Dims{2, 3, 4});
    CHECK_THROWS_AS(unfold_mode_n(t, 0), InvalidArgument);
    CHECK_THROWS_AS(unfold_mode_n(t, 4), InvalidArgument);
    CHECK_THROWS_AS(unfold_canonical(t, 0), InvalidArgument);
    CHECK_THROWS_AS(unfold_canonical(t, 3), InvalidArgument);
    CHECK_THROWS_AS(fold_mode_n(DenseMatrix(3, 7), Dims{2, 3, 4}, 2), InvalidArgument);
    CHECK_THROWS_AS(fold_canonical(DenseMatrix(6, 5), Dims{2, 3, 4}, 2), InvalidArgument);
}

TEST_CASE("fold inverts unfold exactly") {
    std::mt19937_64 rng(2);
    const DenseTensor a = oracle::random_tensor({3, 4, 5}, rng);
    for (std::size_t n = 1; n <= 3; ++n) CHECK(fold_mode_n(unfold_mode_n(a, n), a.dims(), n) == a);
    const DenseTensor b = oracle::random_tensor({5, 6, 7, 2}, rng);
    for (std::size_t n = 1; n <= 4; ++n) CHECK(fold_mode_n(unfold_mode_n(b, n), b.dims(), n) == b);
    const DenseTensor z(Dims{3, 4, 5});
    CHECK(fold_mode_n(DenseMatrix(4, 15), z.dims(), 2) == z);
    CHECK(fold_canonical(DenseMatrix(12, 5), z.dims(), 2) == z);
    const DenseTensor c = oracle::random_tensor({4, 5, 6}, rng);
    for (std::size_t k = 1; k <= 2; ++k) CHECK(fold_canonical(unfold_canonical(c, k), c.dims(), k) == c);
}

TEST_CASE("canonical unfolding is a reshape of the flat data") {
    std::mt19937_64 rng(3);
    const DenseTensor t = oracle::random_tensor({2, 3, 4}, rng);
    const DenseMatrix m1 = unfold_canonical(t, 1), m2 = unfold_canonical(t, 2);
    CHECK(m1.rows() == 2);
    CHECK(m1.cols() == 12);
    CHECK(m2.rows() == 6);
    CHECK(m2.cols() == 4);
    // reshape oracle: element (i, j) of the k-split is the element whose
    // leading-k multi-index linearizes to i and trailing one to j
    std::vector<std::size_t> idx(3, 0);
    do {
        CHECK(m1(idx[0], idx[1] + 3 * idx[2]) == t(idx));
        CHECK(m2(idx[0] + 2 * idx[1], idx[2]) == t(idx));
    } while (oracle::next_index(idx, t.dims()));
    CHECK(std::equal(m2.data().begin(), m2.data().end(), t.data().begin()));
    const MatrixView v = canonical_view(t, 2);
    CHECK(v.data == t.data().data());

    const DenseTensor mat = oracle::random_tensor({3, 5}, rng);
    const DenseMatrix same = unfold_canonical(mat, 1);
    CHECK(same == unfold_mode_n(mat, 1));
}

TEST_CASE("canonical roundtrip on a full-size volume") {
    std::mt19937_64 rng(4);
    const DenseTensor t = oracle::random_tensor({480, 512, 64}, rng);
    for (std::size_t k = 1; k <= 2; ++k) CHECK(fold_canonical(unfold_canonical(t, k), t.dims(), k) == t);
}

TEST_CASE("mode-n product") {
    std::mt19937_64 rng(5);
    const DenseTensor a = oracle::random_tensor({3, 4, 5}, rng);
    for (std::size_t n = 1; n <= 3; ++n) CHECK(mode_n_product(a, DenseMatrix::identity(a.dims()[n - 1]), n) == a);

    const DenseTensor ones(Dims{2, 2, 2}, std::vector<double>(8, 1.0));
    const DenseTensor twos = mode_n_product(ones, DenseMatrix(2, 2, {1, 1, 1, 1}), 1);
    for (double v : twos.data()) CHECK(v == 2.0);

    for (std::size_t n = 1; n <= 3; ++n) {
        const DenseMatrix b = oracle::random_matrix(6, a.dims()[n - 1], rng);
        const DenseTensor p = mode_n_product(a, b, n);
        CHECK(oracle::rel_diff(p.data(), oracle::mode_product(a, b, n).data()) < 1e-14);
        const DenseMatrix lhs = unfold_mode_n(p, n);
        const DenseMatrix rhs = oracle::matmul(b, unfold_mode_n(a, n));
        CHECK(oracle::rel_diff(lhs.data(), rhs.data()) < 1e-14);
    }
    CHECK_THROWS_AS(mode_n_product(a, DenseMatrix(2, 3), 2), InvalidArgument);
}

TEST_CASE("mode-n products compose") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const DenseTensor a = oracle::random_tensor({4, 3, 5, 2}, rng);
        for (std::size_t n = 1; n <= 4; ++n) {
            const DenseMatrix b = oracle::random_matrix(3, a.dims()[n - 1], rng);
            const DenseMatrix c = oracle::random_matrix(4, 3, rng);
            const DenseTensor lhs = mode_n_product(mode_n_product(a, b, n), c, n);
            const DenseTensor rhs = mode_n_product(a, oracle::matmul(c, b), n);
            CHECK(oracle::rel_diff(lhs.data(), rhs.data()) <= 1e-12);
        }
    }
}

TEST_CASE("contracted product") {
    std::mt19937_64 rng(7);
    const DenseTensor a = oracle::random_tensor({2, 3}, rng), b = oracle::random_tensor({3, 2}, rng);
    const DenseTensor ab = contracted_product(a, b);
    const DenseMatrix ref = oracle::matmul(DenseMatrix(2, 3, {a.data().begin(), a.data().end()}),
                                           DenseMatrix(3, 2, {b.data().begin(), b.data().end()}));
    CHECK(ab.dims() == Dims{2, 2});
    CHECK(oracle::max_abs_diff(ab.data(), ref.data()) < 1e-15);

    const DenseTensor c = oracle::random_tensor({2, 3, 4}, rng), d = oracle::random_tensor({4, 5}, rng);
    const DenseTensor cd = contracted_product(c, d);
    REQUIRE(cd.dims() == Dims{2, 3, 5});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 5; ++l) {
                double s = 0;
                for (std::size_t k = 0; k < 4; ++k) s += c({i, j, k}) * d({k, l});
                CHECK(cd({i, j, l}) == doctest::Approx(s).epsilon(1e-14));
            }

    const DenseTensor ones(Dims{4, 1}, std::vector<double>(4, 1.0));
    const DenseTensor sums = contracted_product(c, ones);
    REQUIRE(sums.dims() == Dims{2, 3, 1});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 4; ++k) s += c({i, j, k});
            CHECK(sums({i, j, 0}) == doctest::Approx(s).epsilon(1e-14));
        }
    CHECK_THROWS_AS(contracted_product(c, a), InvalidArgument);
}

TEST_CASE("frobenius norm") {
    CHECK(frobenius_norm(DenseTensor(Dims{3, 3})) == 0.0);
    CHECK(frobenius_norm(DenseTensor(Dims{1}, {3.0})) == 3.0);
    CHECK(frobenius_norm(DenseTensor(Dims{2, 2}, {1, 3, 2, 4})) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-15));
    std::mt19937_64 rng(8);
    const DenseTensor t = oracle::random_tensor({3, 4, 5}, rng);
    const double n = frobenius_norm(t);
    for (std::size_t k = 1; k <= 3; ++k) CHECK(frobenius_norm(unfold_mode_n(t, k)) == doctest::Approx(n).epsilon(1e-14));
    for (std::size_t k = 1; k <= 2; ++k) CHECK(frobenius_norm(unfold_canonical(t, k)) == doctest::Approx(n).epsilon(1e-14));
}

}
