#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "despeckle/error.hpp"
#include "despeckle/io.hpp"
#include "despeckle/linalg.hpp"
#include "despeckle/pipeline.hpp"
#include "oracles.hpp"

using namespace despeckle;

namespace {

using Bytes = std::vector<std::uint8_t>;

FormatErrorKind kind_of(const Bytes& b, bool model) {
    try {
        if (model)
            decode_model(b);
        else
            decode_volume(b);
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("decoder accepted corrupted bytes");
    return FormatErrorKind::io;
}

void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_f64(Bytes& b, std::size_t at, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) b[at + i] = static_cast<std::uint8_t>(u >> (8 * i));
}

std::size_t numerical_rank(const DenseMatrix& m) {
    const auto s = oracle::singular_values(m);
    std::size_t r = 0;
    for (double v : s)
        if (v > 1e-10 * s.front()) ++r;
    return r;
}

StoredModel tt_model(std::mt19937_64& rng) {
    const DenseTensor x = oracle::tt_tensor({4, 5, 6}, {2, 3}, rng);
    return make_stored(tt_svd_ranks(x, {2, 3}), SpNorm::s23);
}

StoredModel tucker_model(std::mt19937_64& rng) {
    const DenseTensor x = oracle::tucker_tensor({6, 5, 4}, {3, 2, 2}, rng);
    return make_stored(tucker_als(x, {3, 2, 2}), std::nullopt);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("despeckle_io_" + name)).string();
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("crc32 check value") {
    const std::string s = "123456789";
    const Bytes b(s.begin(), s.end());
    CHECK(crc32(b) == 0xCBF43926u);
    CHECK(crc32(Bytes{}) == 0u);
}

TEST_CASE("volume roundtrip") {
    std::mt19937_64 rng(1);
    const DenseTensor x = oracle::random_tensor({4, 5, 6}, rng);
    const DenseTensor back = decode_volume(encode_volume(x, ElementType::f64));
    CHECK(back == x);

    const DenseTensor single = decode_volume(encode_volume(x, ElementType::f32));
    CHECK(single.dims() == x.dims());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(single.data()[i] == static_cast<double>(static_cast<float>(x.data()[i])));

    const std::string path = temp_path("vol.octv");
    write_volume(x, path);
    CHECK(read_volume(path) == x);
    const FileInfo info = inspect_file(path);
    CHECK(info.magic == "OCTV");
    CHECK(info.dims == x.dims());
    CHECK(info.element == ElementType::f64);
    CHECK(info.bytes == volume_header_bytes(3) + 8 * 120 + 4);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_volume(path), FormatError);
}

TEST_CASE("volume file size") {
    const DenseTensor x({480, 512, 64});
    const Bytes b = encode_volume(x, ElementType::f32);
    CHECK(volume_header_bytes(3) == 20);
    CHECK(b.size() == 20 + 4 * 15728640ull + 4);
}

TEST_CASE("volume corruption classes") {
    std::mt19937_64 rng(2);
    const Bytes good = encode_volume(oracle::random_tensor({3, 4, 2}, rng), ElementType::f64);
    Bytes b = good;
    b[0] = 'X';
    CHECK(kind_of(b, false) == FormatErrorKind::bad_magic);
    b = good;
    b[4] = 2;
    CHECK(kind_of(b, false) == FormatErrorKind::bad_version);
    b = good;
    b[6] = 3;
    CHECK(kind_of(b, false) == FormatErrorKind::bad_element_type);
    b = good;
    b[7] = 0;
    CHECK(kind_of(b, false) == FormatErrorKind::bad_header);
    b = good;
    put_u32(b, 12, 0);
    CHECK(kind_of(b, false) == FormatErrorKind::bad_header);
    b = good;
    b.pop_back();
    CHECK(kind_of(b, false) == FormatErrorKind::truncated);
    b.resize(10);
    CHECK(kind_of(b, false) == FormatErrorKind::truncated);
    b = good;
    b.push_back(0);
    CHECK(kind_of(b, false) == FormatErrorKind::trailing_bytes);
    b = good;
    b[30] ^= 0x10;
    CHECK(kind_of(b, false) == FormatErrorKind::crc_mismatch);
    b = good;
    b.back() ^= 1;
    CHECK(kind_of(b, false) == FormatErrorKind::crc_mismatch);
    // A huge dimension must be reported as truncation, not allocated.
    b = good;
    put_u32(b, 8, 0xFFFFFFFFu);
    put_u32(b, 12, 0xFFFFFFFFu);
    CHECK(kind_of(b, false) == FormatErrorKind::truncated);
}

TEST_CASE("model roundtrip") {
    std::mt19937_64 rng(3);
    for (const StoredModel& m : {tt_model(rng), tucker_model(rng)}) {
        const StoredModel back = decode_model(encode_model(m));
        CHECK(back.ranks() == m.ranks());
        CHECK(back.dims() == m.dims());
        CHECK(back.norm == m.norm);
        CHECK(back.cr == m.cr);
        CHECK(back.tt.has_value() == m.tt.has_value());
        const DenseTensor a = m.reconstruct(), c = back.reconstruct();
        CHECK(oracle::rel_diff(a.data(), c.data()) < 1e-6);
        if (m.tt) {
            for (std::size_t k = 0; k < m.tt->cores.size(); ++k)
                for (std::size_t i = 0; i < m.tt->cores[k].size(); ++i)
                    CHECK(back.tt->cores[k].data()[i] == static_cast<double>(static_cast<float>(m.tt->cores[k].data()[i])));
        }
        const Bytes again = encode_model(back);
        CHECK(again == encode_model(m));
    }
}

TEST_CASE("model cr matches the rank formulas") {
    std::mt19937_64 rng(4);
    const StoredModel t = tt_model(rng);
    CHECK(t.cr == doctest::Approx(cr_tt(t.dims(), 2, 3)).epsilon(1e-14));
    const StoredModel u = tucker_model(rng);
    CHECK(u.cr == doctest::Approx(cr_ml(u.dims(), 3, 2, 2)).epsilon(1e-14));
}

TEST_CASE("model file size is the parameter count") {
    std::mt19937_64 rng(5);
    const StoredModel m = tucker_model(rng);
    const Bytes b = encode_model(m);
    const std::size_t params = 3 * 2 * 2 + 6 * 3 + 5 * 2 + 4 * 2;
    CHECK(b.size() == model_header_bytes(3, 3) + 4 * params + 4);

    const StoredModel t = tt_model(rng);
    CHECK(encode_model(t).size() == model_header_bytes(3, 2) + 4 * (4 * 2 + 2 * 5 * 3 + 3 * 6) + 4);

    // Payload byte ratio of an f32 volume over the model equals the CR.
    const double volume_payload = 4.0 * 6 * 5 * 4;
    CHECK(volume_payload / (4.0 * params) == doctest::Approx(m.cr).epsilon(1e-14));
}

TEST_CASE("model corruption classes") {
    std::mt19937_64 rng(6);
    const Bytes good = encode_model(tt_model(rng));
    // Header: magic 0, version 4, kind 6, norm 7, order 8, dims 9, ranks 21, cr 29.
    Bytes b = good;
    b[1] = 'X';
    CHECK(kind_of(b, true) == FormatErrorKind::bad_magic);
    b = good;
    b[5] = 1;
    CHECK(kind_of(b, true) == FormatErrorKind::bad_version);
    b = good;
    b[6] = 7;
    CHECK(kind_of(b, true) == FormatErrorKind::bad_header);
    b = good;
    b[7] = 9;
    CHECK(kind_of(b, true) == FormatErrorKind::bad_header);
    b = good;
    put_u32(b, 9, 0);
    CHECK(kind_of(b, true) == FormatErrorKind::bad_header);
    b = good;
    put_u32(b, 21, 3);
    CHECK(kind_of(b, true) == FormatErrorKind::inconsistent);
    b = good;
    put_u32(b, 25, 0);
    CHECK(kind_of(b, true) == FormatErrorKind::inconsistent);
    b = good;
    put_f64(b, 29, 2.0);
    CHECK(kind_of(b, true) == FormatErrorKind::inconsistent);
    b = good;
    b.pop_back();
    CHECK(kind_of(b, true) == FormatErrorKind::truncated);
    b = good;
    b.push_back(7);
    CHECK(kind_of(b, true) == FormatErrorKind::trailing_bytes);
    b = good;
    b[40] ^= 0x80;
    CHECK(kind_of(b, true) == FormatErrorKind::crc_mismatch);
    CHECK(kind_of(encode_volume(DenseTensor({2, 2}), ElementType::f32), true) == FormatErrorKind::bad_magic);
}

TEST_CASE("fuzzed headers never crash the readers") {
    std::mt19937_64 rng(7);
    const Bytes vol = encode_volume(oracle::random_tensor({5, 3, 4}, rng), ElementType::f32);
    const Bytes tt = encode_model(tt_model(rng));
    const Bytes tk = encode_model(tucker_model(rng));
    std::size_t rejected = 0, total = 0;
    for (int trial = 0; trial < 6000; ++trial) {
        const int which = trial % 3;
        Bytes b = which == 0 ? vol : which == 1 ? tt : tk;
        const std::size_t header = which == 0 ? volume_header_bytes(3) : model_header_bytes(3, which == 1 ? 2 : 3);
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits; ++e) {
            const std::size_t at = rng() % header;
            b[at] = rng() % 4 == 0 ? static_cast<std::uint8_t>(b[at] ^ (1u << (rng() % 8))) : static_cast<std::uint8_t>(rng());
        }
        if (rng() % 5 == 0) b.resize(rng() % (b.size() + 1));
        const Bytes& orig = which == 0 ? vol : which == 1 ? tt : tk;
        ++total;
        try {
            // Accepted input must carry the original content. The CRC covers only
            // the payload, so a norm code swapped for another valid code and low
            // bits of the stored CR (within tolerance) pass undetected.
            if (which == 0) {
                const DenseTensor got = decode_volume(b);
                CHECK(got == decode_volume(orig));
            } else {
                const StoredModel got = decode_model(b), want = decode_model(orig);
                CHECK(got.ranks() == want.ranks());
                CHECK(got.dims() == want.dims());
                CHECK(got.reconstruct() == want.reconstruct());
                CHECK(std::abs(got.cr - want.cr) <= 1e-9 * want.cr);
            }
        } catch (const FormatError&) {
            ++rejected;
        }
    }
    CHECK(rejected > total * 9 / 10);

    for (int trial = 0; trial < 2000; ++trial) {
        Bytes b(rng() % 64);
        for (auto& v : b) v = static_cast<std::uint8_t>(rng());
        if (b.size() >= 4 && trial % 2 == 0) std::memcpy(b.data(), trial % 4 == 0 ? "OCTV" : "TTML", 4);
        try {
            if (trial % 4 == 0)
                decode_volume(b);
            else
                decode_model(b);
        } catch (const FormatError&) {
        }
    }
}

TEST_CASE("inspect model file") {
    std::mt19937_64 rng(8);
    const StoredModel m = tt_model(rng);
    const std::string path = temp_path("model.ttml");
    write_model(m, path);
    const FileInfo info = inspect_file(path);
    CHECK(info.magic == "TTML");
    CHECK(info.kind == "tt");
    CHECK(info.norm == SpNorm::s23);
    CHECK(info.ranks == std::vector<std::size_t>{2, 3});
    CHECK(info.cr == m.cr);
    CHECK(read_model(path).ranks() == m.ranks());
    std::filesystem::remove(path);
}

TEST_CASE("gamma speckle moments") {
    for (double looks : {0.5, 1.0, 4.0}) {
        GammaSpeckle g(looks, 42);
        const int n = 200000;
        double s = 0, ss = 0;
        bool positive = true;
        for (int i = 0; i < n; ++i) {
            const double v = g();
            positive = positive && v > 0;
            s += v;
            ss += v * v;
        }
        const double mean = s / n, var = ss / n - mean * mean;
        CHECK(positive);
        CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
        CHECK(var == doctest::Approx(1.0 / looks).epsilon(0.05));
    }
    CHECK_THROWS_AS(GammaSpeckle(0.0, 1), InvalidArgument);
}

TEST_CASE("phantom is deterministic") {
    SpeckledPhantomSpec spec;
    spec.dims = {40, 30, 10};
    spec.rank = {4, 3, 2};
    spec.seed = 9;
    const Phantom a = make_phantom(spec), b = make_phantom(spec);
    CHECK(a.noisy == b.noisy);
    CHECK(a.clean == b.clean);
    spec.seed = 10;
    CHECK(!(make_phantom(spec).noisy == a.noisy));
}

TEST_CASE("phantom has the requested structure") {
    SpeckledPhantomSpec spec;
    spec.dims = {40, 30, 10};
    spec.rank = {4, 3, 2};
    const Phantom p = make_phantom(spec);
    for (std::size_t n = 1; n <= 3; ++n) CHECK(numerical_rank(unfold_mode_n(p.clean, n)) == spec.rank[n - 1]);
    for (double v : p.clean.data()) CHECK(v > 0);

    spec.rank = {3, 2};
    const Phantom q = make_phantom(spec);
    CHECK(numerical_rank(unfold_canonical(q.clean, 1)) == 3);
    CHECK(numerical_rank(unfold_canonical(q.clean, 2)) == 2);

    // The reported block is constant in the clean volume.
    const double v0 = p.clean({p.block_lo[0], p.block_lo[1], p.block_lo[2]});
    for (std::size_t k = p.block_lo[2]; k < p.block_hi[2]; ++k)
        for (std::size_t j = p.block_lo[1]; j < p.block_hi[1]; ++j)
            for (std::size_t i = p.block_lo[0]; i < p.block_hi[0]; ++i) CHECK(p.clean({i, j, k}) == v0);

    spec.dims = {4, 4};
    CHECK_THROWS_AS(make_phantom(spec), InvalidArgument);
    spec.dims = {4, 4, 4};
    spec.rank = {5, 1, 1};
    CHECK_THROWS_AS(make_phantom(spec), InvalidArgument);
}

TEST_CASE("phantom speckle statistics") {
    SpeckledPhantomSpec spec;
    spec.dims = {60, 50, 20};
    spec.rank = {3, 2, 2};
    spec.looks = 1e6;
    const Phantom smooth = make_phantom(spec);
    CHECK(oracle::rel_diff(smooth.noisy.data(), smooth.clean.data()) < 1e-2);

    spec.looks = 1.0;
    const Phantom rough = make_phantom(spec);
    double s = 0, ss = 0;
    const std::size_t n = rough.clean.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rough.noisy.data()[i] / rough.clean.data()[i];
        s += r;
        ss += r * r;
    }
    const double mean = s / n, sd = std::sqrt(ss / n - mean * mean);
    CHECK(sd / mean == doctest::Approx(1.0).epsilon(0.03));
}

}
