#include "despeckle/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "despeckle/error.hpp"

namespace despeckle {
namespace {

constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kNoNorm = 255;
constexpr std::size_t kSat = std::numeric_limits<std::size_t>::max();

std::size_t mul_sat(std::size_t a, std::size_t b) {
    if (a != 0 && b > kSat / a) return kSat;
    return a * b;
}

std::size_t add_sat(std::size_t a, std::size_t b) { return b > kSat - a ? kSat : a + b; }

[[noreturn]] void fail(FormatErrorKind k, const std::string& what) { throw FormatError(k, what); }

class Writer {
public:
    void bytes(const char* s, std::size_t n) { out.insert(out.end(), s, s + n); }
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) { uint(v, 2); }
    void u32(std::uint32_t v) { uint(v, 4); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v), 8); }
    std::vector<std::uint8_t> out;

private:
    void uint(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    bool has(std::size_t n) const { return n <= b_.size() - pos_; }
    std::uint64_t uint(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(uint(8)); }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

void need(const Reader& r, std::size_t n, const char* what) {
    if (!r.has(n)) fail(FormatErrorKind::truncated, std::string("file ends inside the ") + what);
}

void check_magic(Reader& r, const char* magic) {
    need(r, 4, "magic");
    for (int i = 0; i < 4; ++i)
        if (r.u8() != static_cast<std::uint8_t>(magic[i])) fail(FormatErrorKind::bad_magic, std::string("expected ") + magic);
}

std::uint8_t norm_code(std::optional<SpNorm> n) {
    if (!n) return kNoNorm;
    switch (*n) {
    case SpNorm::s0: return 0;
    case SpNorm::s12: return 1;
    case SpNorm::s23: return 2;
    case SpNorm::s1: return 3;
    }
    return kNoNorm;
}

std::optional<SpNorm> norm_from_code(std::uint8_t c) {
    switch (c) {
    case 0: return SpNorm::s0;
    case 1: return SpNorm::s12;
    case 2: return SpNorm::s23;
    case 3: return SpNorm::s1;
    case kNoNorm: return std::nullopt;
    default: fail(FormatErrorKind::bad_header, "unknown norm code " + std::to_string(c));
    }
}

std::uint32_t dim32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument(std::string(what) + " exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

// --- volume header ---

struct VolumeHeader {
    ElementType type = ElementType::f64;
    Dims dims;
    std::size_t header = 0;
    std::size_t payload = 0;
};

VolumeHeader parse_volume_header(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    check_magic(r, "OCTV");
    need(r, 4, "header");
    const std::uint16_t version = r.u16();
    if (version != kVersion) fail(FormatErrorKind::bad_version, "unsupported version " + std::to_string(version));
    const std::uint8_t type = r.u8();
    if (type != 1 && type != 2) fail(FormatErrorKind::bad_element_type, "element type " + std::to_string(type));
    const std::uint8_t order = r.u8();
    if (order == 0) fail(FormatErrorKind::bad_header, "order 0");
    need(r, 4u * order, "dimension list");
    VolumeHeader h;
    h.type = static_cast<ElementType>(type);
    std::size_t count = 1;
    for (int i = 0; i < order; ++i) {
        h.dims.push_back(r.u32());
        if (h.dims.back() == 0) fail(FormatErrorKind::bad_header, "zero dimension");
        count = mul_sat(count, h.dims.back());
    }
    h.header = r.pos();
    h.payload = mul_sat(count, type == 1 ? 4 : 8);
    return h;
}

void check_size(std::size_t have, std::size_t header, std::size_t payload) {
    const std::size_t want = add_sat(add_sat(header, payload), 4);
    if (have < want) fail(FormatErrorKind::truncated, "file shorter than its header promises");
    if (have > want) fail(FormatErrorKind::trailing_bytes, "unexpected bytes after the checksum");
}

void check_crc(std::span<const std::uint8_t> bytes, std::size_t header, std::size_t payload) {
    Reader r(bytes.subspan(header + payload));
    if (r.u32() != crc32(bytes.subspan(header, payload))) fail(FormatErrorKind::crc_mismatch, "payload checksum");
}

// --- model header ---

struct ModelHeader {
    std::uint8_t kind = 1;
    std::optional<SpNorm> norm;
    Dims dims;
    std::vector<std::size_t> ranks;
    double cr = 0.0;
    std::size_t header = 0;
    std::size_t params = 0;
};

std::size_t tt_params(const Dims& d, const std::vector<std::size_t>& r) {
    std::size_t p = 0, prev = 1;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const std::size_t next = k + 1 < d.size() ? r[k] : 1;
        p = add_sat(p, mul_sat(mul_sat(prev, d[k]), next));
        prev = next;
    }
    return p;
}

std::size_t tucker_params(const Dims& d, const std::vector<std::size_t>& r) {
    std::size_t core = 1, p = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        core = mul_sat(core, r[k]);
        p = add_sat(p, mul_sat(d[k], r[k]));
    }
    return add_sat(p, core);
}

double product(const Dims& d, std::size_t from, std::size_t to) {
    double p = 1.0;
    for (std::size_t i = from; i < to; ++i) p *= static_cast<double>(d[i]);
    return p;
}

ModelHeader parse_model_header(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    check_magic(r, "TTML");
    need(r, 5, "header");
    const std::uint16_t version = r.u16();
    if (version != kVersion) fail(FormatErrorKind::bad_version, "unsupported version " + std::to_string(version));
    ModelHeader h;
    h.kind = r.u8();
    if (h.kind != 1 && h.kind != 2) fail(FormatErrorKind::bad_header, "unknown model kind " + std::to_string(h.kind));
    h.norm = norm_from_code(r.u8());
    const std::uint8_t order = r.u8();
    if (order == 0 || (h.kind == 1 && order < 2)) fail(FormatErrorKind::bad_header, "invalid order");
    const std::size_t k = h.kind == 1 ? order - 1u : order;
    need(r, 4u * (order + k) + 8, "dimension and rank lists");
    for (int i = 0; i < order; ++i) {
        h.dims.push_back(r.u32());
        if (h.dims.back() == 0) fail(FormatErrorKind::bad_header, "zero dimension");
    }
    for (std::size_t i = 0; i < k; ++i) h.ranks.push_back(r.u32());
    h.cr = r.f64();
    h.header = r.pos();

    for (std::size_t i = 0; i < k; ++i) {
        const double bound = h.kind == 1 ? std::min(product(h.dims, 0, i + 1), product(h.dims, i + 1, order))
                                         : static_cast<double>(h.dims[i]);
        if (h.ranks[i] == 0 || static_cast<double>(h.ranks[i]) > bound)
            fail(FormatErrorKind::inconsistent, "rank " + std::to_string(i + 1) + " out of bounds");
    }
    h.params = h.kind == 1 ? tt_params(h.dims, h.ranks) : tucker_params(h.dims, h.ranks);
    const double cr = product(h.dims, 0, order) / static_cast<double>(h.params);
    if (!std::isfinite(h.cr) || !(std::abs(h.cr - cr) <= 1e-9 * cr))
        fail(FormatErrorKind::inconsistent, "stored CR does not match the ranks");
    return h;
}

DenseTensor take_tensor(Reader& r, Dims dims) {
    std::vector<double> v(numel(dims));
    for (auto& x : v) {
        x = r.f32();
        if (!std::isfinite(x)) fail(FormatErrorKind::inconsistent, "non-finite model entry");
    }
    return DenseTensor(std::move(dims), std::move(v));
}

DenseMatrix take_matrix(Reader& r, std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) {
        x = r.f32();
        if (!std::isfinite(x)) fail(FormatErrorKind::inconsistent, "non-finite model entry");
    }
    return DenseMatrix(rows, cols, std::move(v));
}

// --- phantom helpers ---

// Random partition of [0, n) into r nonempty bands; returns band starts plus n.
std::vector<std::size_t> partition(std::size_t n, std::size_t r, std::mt19937_64& rng) {
    std::vector<std::size_t> cuts(n - 1);
    for (std::size_t i = 0; i < cuts.size(); ++i) cuts[i] = i + 1;
    for (std::size_t i = 0; i + 1 < r; ++i) std::swap(cuts[i], cuts[i + rng() % (cuts.size() - i)]);
    std::vector<std::size_t> out{0};
    out.insert(out.end(), cuts.begin(), cuts.begin() + (r - 1));
    out.push_back(n);
    std::sort(out.begin(), out.end());
    return out;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = ~seed;
    for (std::uint8_t b : bytes) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
    return ~c;
}

std::size_t volume_header_bytes(std::size_t order) { return 8 + 4 * order; }
std::size_t model_header_bytes(std::size_t order, std::size_t rank_count) { return 9 + 4 * (order + rank_count) + 8; }

std::vector<std::uint8_t> encode_volume(const DenseTensor& t, ElementType type) {
    if (t.order() == 0 || t.order() > 255) throw InvalidArgument("volume order must be 1..255");
    Writer w;
    w.bytes("OCTV", 4);
    w.u16(kVersion);
    w.u8(static_cast<std::uint8_t>(type));
    w.u8(static_cast<std::uint8_t>(t.order()));
    for (std::size_t d : t.dims()) w.u32(dim32(d, "dimension"));
    const std::size_t header = w.out.size();
    for (double v : t.data()) type == ElementType::f32 ? w.f32(static_cast<float>(v)) : w.f64(v);
    const std::uint32_t crc = crc32(std::span(w.out).subspan(header));
    w.u32(crc);
    return std::move(w.out);
}

DenseTensor decode_volume(std::span<const std::uint8_t> bytes) {
    const VolumeHeader h = parse_volume_header(bytes);
    check_size(bytes.size(), h.header, h.payload);
    check_crc(bytes, h.header, h.payload);
    Reader r(bytes.subspan(h.header, h.payload));
    std::vector<double> v(numel(h.dims));
    for (auto& x : v) x = h.type == ElementType::f32 ? static_cast<double>(r.f32()) : r.f64();
    for (double x : v)
        if (!std::isfinite(x)) fail(FormatErrorKind::inconsistent, "non-finite voxel");
    return DenseTensor(h.dims, std::move(v));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(FormatErrorKind::io, "cannot open " + path);
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) fail(FormatErrorKind::io, "read failed: " + path);
    return b;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(FormatErrorKind::io, "cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(FormatErrorKind::io, "write failed: " + path);
}

void write_volume(const DenseTensor& t, const std::string& path, ElementType type) {
    write_file(path, encode_volume(t, type));
}

DenseTensor read_volume(const std::string& path) { return decode_volume(read_file(path)); }

double parameter_cr(const Dims& dims, std::size_t parameters) {
    return product(dims, 0, dims.size()) / static_cast<double>(parameters);
}

StoredModel make_stored(const TTModel& m, std::optional<SpNorm> norm) {
    m.validate();
    StoredModel s;
    s.norm = norm;
    s.tt = m;
    s.cr = parameter_cr(m.dims, m.parameter_count());
    return s;
}

StoredModel make_stored(const TuckerModel& m, std::optional<SpNorm> norm) {
    m.validate();
    StoredModel s;
    s.norm = norm;
    s.tucker = m;
    s.cr = parameter_cr(m.dims(), m.parameter_count());
    return s;
}

Dims StoredModel::dims() const { return tt ? tt->dims : tucker ? tucker->dims() : Dims{}; }

std::vector<std::size_t> StoredModel::ranks() const { return tt ? tt->ranks() : tucker ? tucker->ranks() : std::vector<std::size_t>{}; }

DenseTensor StoredModel::reconstruct() const {
    if (tt) return tt_reconstruct(*tt);
    if (tucker) return tucker_reconstruct(*tucker);
    throw InvalidArgument("stored model is empty");
}

std::vector<std::uint8_t> encode_model(const StoredModel& m) {
    if (m.tt.has_value() == m.tucker.has_value()) throw InvalidArgument("stored model must hold exactly one model");
    const Dims dims = m.dims();
    const auto ranks = m.ranks();
    if (dims.size() > 255) throw InvalidArgument("model order must be at most 255");
    Writer w;
    w.bytes("TTML", 4);
    w.u16(kVersion);
    w.u8(m.tt ? 1 : 2);
    w.u8(norm_code(m.norm));
    w.u8(static_cast<std::uint8_t>(dims.size()));
    for (std::size_t d : dims) w.u32(dim32(d, "dimension"));
    for (std::size_t r : ranks) w.u32(dim32(r, "rank"));
    w.f64(m.cr);
    const std::size_t header = w.out.size();
    if (m.tt) {
        m.tt->validate();
        for (const auto& c : m.tt->cores)
            for (double v : c.data()) w.f32(static_cast<float>(v));
    } else {
        m.tucker->validate();
        for (double v : m.tucker->core.data()) w.f32(static_cast<float>(v));
        for (const auto& f : m.tucker->factors)
            for (double v : f.data()) w.f32(static_cast<float>(v));
    }
    const std::uint32_t crc = crc32(std::span(w.out).subspan(header));
    w.u32(crc);
    return std::move(w.out);
}

StoredModel decode_model(std::span<const std::uint8_t> bytes) {
    const ModelHeader h = parse_model_header(bytes);
    const std::size_t payload = mul_sat(h.params, 4);
    check_size(bytes.size(), h.header, payload);
    check_crc(bytes, h.header, payload);
    Reader r(bytes.subspan(h.header, payload));
    StoredModel s;
    s.norm = h.norm;
    s.cr = h.cr;
    if (h.kind == 1) {
        TTModel m;
        m.dims = h.dims;
        std::size_t prev = 1;
        for (std::size_t k = 0; k < h.dims.size(); ++k) {
            const std::size_t next = k + 1 < h.dims.size() ? h.ranks[k] : 1;
            m.cores.push_back(take_tensor(r, {prev, h.dims[k], next}));
            prev = next;
        }
        s.tt = std::move(m);
    } else {
        TuckerModel m;
        m.core = take_tensor(r, Dims(h.ranks.begin(), h.ranks.end()));
        for (std::size_t k = 0; k < h.dims.size(); ++k) m.factors.push_back(take_matrix(r, h.dims[k], h.ranks[k]));
        s.tucker = std::move(m);
    }
    return s;
}

void write_model(const StoredModel& m, const std::string& path) { write_file(path, encode_model(m)); }

StoredModel read_model(const std::string& path) { return decode_model(read_file(path)); }

FileInfo inspect_file(const std::string& path) {
    const auto bytes = read_file(path);
    FileInfo info;
    info.bytes = bytes.size();
    if (bytes.size() < 4) fail(FormatErrorKind::truncated, "file too short for a magic number");
    info.magic.assign(bytes.begin(), bytes.begin() + 4);
    if (info.magic == "OCTV") {
        const VolumeHeader h = parse_volume_header(bytes);
        check_size(bytes.size(), h.header, h.payload);
        check_crc(bytes, h.header, h.payload);
        info.version = kVersion;
        info.dims = h.dims;
        info.element = h.type;
    } else if (info.magic == "TTML") {
        const ModelHeader h = parse_model_header(bytes);
        const std::size_t payload = mul_sat(h.params, 4);
        check_size(bytes.size(), h.header, payload);
        check_crc(bytes, h.header, payload);
        info.version = kVersion;
        info.dims = h.dims;
        info.kind = h.kind == 1 ? "tt" : "tucker";
        info.norm = h.norm;
        info.ranks = h.ranks;
        info.cr = h.cr;
    } else {
        fail(FormatErrorKind::bad_magic, "neither OCTV nor TTML");
    }
    return info;
}

// --- phantom -------------------------------------------------------------------

GammaSpeckle::GammaSpeckle(double looks, std::uint64_t seed) : looks_(looks), rng_(seed) {
    if (!(looks > 0.0) || !std::isfinite(looks)) throw InvalidArgument("looks must be positive and finite");
}

double GammaSpeckle::uniform() { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; }

double GammaSpeckle::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
}

// Marsaglia-Tsang; shapes below one are boosted by U^(1/shape).
double GammaSpeckle::gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double GammaSpeckle::operator()() { return gamma(looks_) / looks_; }

Phantom make_phantom(const SpeckledPhantomSpec& spec) {
    const Dims& d = spec.dims;
    if (d.size() != 3) throw InvalidArgument("phantom: dims must be 3-way");
    for (std::size_t v : d)
        if (v == 0) throw InvalidArgument("phantom: zero dimension");
    std::vector<std::size_t> r;
    if (spec.rank.size() == 3) {
        r = spec.rank;
    } else if (spec.rank.size() == 2) {
        // A Tucker model with ranks (R1, m, R2) has TT rank (R1, R2).
        r = {spec.rank[0], std::min(spec.rank[0] * spec.rank[1], d[1]), spec.rank[1]};
    } else {
        throw InvalidArgument("phantom: rank needs 2 (TT) or 3 (ML) entries");
    }
    for (std::size_t k = 0; k < 3; ++k)
        if (r[k] == 0 || r[k] > d[k]) throw InvalidArgument("phantom: rank out of range for its mode");
    if (!(spec.looks > 0.0) || !std::isfinite(spec.looks)) throw InvalidArgument("phantom: looks must be positive");

    std::mt19937_64 rng(spec.seed);
    std::array<std::vector<std::size_t>, 3> band;
    for (std::size_t k = 0; k < 3; ++k) band[k] = partition(d[k], r[k], rng);
    std::vector<double> level(r[0]);
    for (auto& l : level) l = 0.1 + 0.9 * unit(rng);
    std::vector<double> core(r[0] * r[1] * r[2]);
    for (std::size_t c = 0; c < r[2]; ++c)
        for (std::size_t b = 0; b < r[1]; ++b)
            for (std::size_t a = 0; a < r[0]; ++a) core[a + r[0] * (b + r[1] * c)] = level[a] * (0.75 + 0.5 * unit(rng));

    std::array<std::vector<std::size_t>, 3> label;
    for (std::size_t k = 0; k < 3; ++k) {
        label[k].resize(d[k]);
        for (std::size_t j = 0; j + 1 < band[k].size(); ++j)
            for (std::size_t i = band[k][j]; i < band[k][j + 1]; ++i) label[k][i] = j;
    }
    std::vector<double> clean(numel(d)), noisy(numel(d));
    GammaSpeckle speckle(spec.looks, spec.seed ^ 0x9E3779B97F4A7C15ull);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < d[2]; ++k)
        for (std::size_t j = 0; j < d[1]; ++j)
            for (std::size_t i = 0; i < d[0]; ++i, ++idx) {
                clean[idx] = core[label[0][i] + r[0] * (label[1][j] + r[1] * label[2][k])];
                noisy[idx] = clean[idx] * speckle();
            }

    Phantom p{DenseTensor(d, std::move(clean)), DenseTensor(d, std::move(noisy)), {}, {}};
    p.block_lo.resize(3);
    p.block_hi.resize(3);
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < r[k]; ++j)
            if (band[k][j + 1] - band[k][j] > band[k][best + 1] - band[k][best]) best = j;
        p.block_lo[k] = band[k][best];
        p.block_hi[k] = band[k][best + 1];
    }
    return p;
}

} // namespace despeckle
