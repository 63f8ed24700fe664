#pragma once

// Binary containers for volumes (OCTV) and compressed models (TTML), and the
// synthetic speckled phantom.
//
// OCTV, little-endian:
//   "OCTV" | u16 version=1 | u8 element type (1 f32, 2 f64) | u8 order N |
//   N x u32 dims | column-major payload | u32 CRC-32 of the payload
//
// TTML, little-endian:
//   "TTML" | u16 version=1 | u8 kind (1 TT, 2 Tucker) | u8 norm code |
//   u8 order N | N x u32 dims | K x u32 ranks (K = N-1 for TT, N for Tucker) |
//   f64 CR | f32 payload | u32 CRC-32 of the payload
// The TT payload is the cores in order; the Tucker payload is the core then the
// factors, all column-major. Norm codes: 0 s0, 1 s12, 2 s23, 3 s1, 255 none.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "despeckle/decomp.hpp"
#include "despeckle/prox.hpp"
#include "despeckle/tensor.hpp"

namespace despeckle {

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed = 0);

enum class ElementType : std::uint8_t { f32 = 1, f64 = 2 };

std::vector<std::uint8_t> encode_volume(const DenseTensor& t, ElementType type);
DenseTensor decode_volume(std::span<const std::uint8_t> bytes);
void write_volume(const DenseTensor& t, const std::string& path, ElementType type = ElementType::f64);
DenseTensor read_volume(const std::string& path);

struct StoredModel {
    std::optional<SpNorm> norm;
    std::optional<TTModel> tt;
    std::optional<TuckerModel> tucker;
    double cr = 0.0;  // as stored; equals the parameter-count CR

    Dims dims() const;
    std::vector<std::size_t> ranks() const;
    DenseTensor reconstruct() const;
};

StoredModel make_stored(const TTModel& m, std::optional<SpNorm> norm);
StoredModel make_stored(const TuckerModel& m, std::optional<SpNorm> norm);
// numel(dims) / parameter count.
double parameter_cr(const Dims& dims, std::size_t parameters);

std::vector<std::uint8_t> encode_model(const StoredModel& m);
StoredModel decode_model(std::span<const std::uint8_t> bytes);
void write_model(const StoredModel& m, const std::string& path);
StoredModel read_model(const std::string& path);

std::size_t volume_header_bytes(std::size_t order);
std::size_t model_header_bytes(std::size_t order, std::size_t rank_count);

// Header metadata of either container, without decoding the payload.
struct FileInfo {
    std::string magic;
    unsigned version = 0;
    Dims dims;
    std::optional<ElementType> element;        // volumes
    std::string kind;                          // "tt" / "tucker" for models
    std::optional<SpNorm> norm;
    std::vector<std::size_t> ranks;
    double cr = 0.0;
    std::size_t bytes = 0;
};
FileInfo inspect_file(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

// --- phantom -------------------------------------------------------------------

struct SpeckledPhantomSpec {
    Dims dims{480, 512, 64};
    // Two entries: latent TT rank (R1, R2); three: latent ML rank.
    std::vector<std::size_t> rank{8, 6, 4};
    double looks = 1.0;
    std::uint64_t seed = 1;
};

struct Phantom {
    DenseTensor clean;
    DenseTensor noisy;
    // Largest constant block of the clean volume, [lo, hi) per mode.
    std::vector<std::size_t> block_lo;
    std::vector<std::size_t> block_hi;
};

// Clean volume: depth bands times lateral segments times B-scan slabs with a
// random positive core, so the ML (or TT) rank is exactly the requested one.
// Noisy volume: clean times i.i.d. Gamma(looks, 1/looks) speckle.
Phantom make_phantom(const SpeckledPhantomSpec& spec);

// Gamma(looks, 1/looks) sampler driven directly by mt19937_64, so the stream
// does not depend on the standard library's distribution implementations.
class GammaSpeckle {
public:
    GammaSpeckle(double looks, std::uint64_t seed);
    double operator()();

private:
    double uniform();
    double normal();
    double gamma(double shape);

    double looks_;
    std::mt19937_64 rng_;
    std::optional<double> spare_;
};

} // namespace despeckle
