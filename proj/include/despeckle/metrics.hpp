#pragma once

// Quality measures and the B-scan alignment step, plus the CSV formats for
// region masks and layer surfaces.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "despeckle/tensor.hpp"

namespace despeckle {

// ||x - xhat|| / ||x||. Throws InvalidArgument on a shape mismatch and
// InvalidInput when ||x|| = 0.
double relative_error(const DenseTensor& x, const DenseTensor& xhat);

struct RegionMask {
    Dims dims;
    std::vector<std::uint8_t> inside;  // column-major, same layout as the volume

    explicit RegionMask(Dims d = {}) : dims(std::move(d)), inside(numel(dims), 0) {}
    std::size_t count() const;
};

// Box [lo, hi) per mode, 0-based.
RegionMask box_mask(const Dims& dims, const std::vector<std::size_t>& lo, const std::vector<std::size_t>& hi);

// mean / population std over the region.
double cnr(const DenseTensor& x, const RegionMask& region);
// 20 log10(max over signal / population std over background), in dB.
double snr(const DenseTensor& x, const RegionMask& signal, const RegionMask& background);

struct SurfaceSet {
    std::size_t bscan_width = 0;  // I_2
    std::size_t bscans = 0;       // I_3
    std::size_t surfaces = 0;     // L
    std::vector<double> position; // index i2 + I2 * (i3 + I3 * l), 1-based depth

    SurfaceSet() = default;
    SurfaceSet(std::size_t i2, std::size_t i3, std::size_t l)
        : bscan_width(i2), bscans(i3), surfaces(l), position(i2 * i3 * l, 0.0) {}

    double& at(std::size_t i2, std::size_t i3, std::size_t l) { return position[i2 + bscan_width * (i3 + bscans * l)]; }
    double at(std::size_t i2, std::size_t i3, std::size_t l) const {
        return position[i2 + bscan_width * (i3 + bscans * l)];
    }
    // Distance between the outermost surfaces at (i2, i3).
    double thickness(std::size_t i2, std::size_t i3) const;
};

// Mean over the B-scans in `subset` (1-based i3), all columns and surfaces of
// |auto - manual| / T, with T taken from the manual set.
double segmentation_error(const SurfaceSet& automatic, const SurfaceSet& manual,
                          const std::vector<std::size_t>& subset);

// heights[b] holds upper-boundary depths sampled in the outer 20% columns of
// B-scan b. Each B-scan moves by an integer number of rows (zero fill) so that
// its mean boundary height matches the mean over all B-scans.
DenseTensor align_bscans(const DenseTensor& x, const std::vector<std::vector<double>>& heights);
// The integer shift applied to each B-scan (positive moves content down).
std::vector<long> alignment_shifts(std::size_t depth, const std::vector<std::vector<double>>& heights);

// CSV readers. Masks: one "i1,i2,i3" row per voxel inside the region (1-based).
// Surfaces: "i2,i3,l,position" rows (1-based indices), every cell present.
// Lines starting with '#' and a non-numeric header line are skipped. Throw
// FormatError(parse) on malformed content.
RegionMask read_mask_csv(std::istream& in, const Dims& dims);
RegionMask read_mask_csv(const std::string& path, const Dims& dims);
SurfaceSet read_surfaces_csv(std::istream& in);
SurfaceSet read_surfaces_csv(const std::string& path);

} // namespace despeckle
