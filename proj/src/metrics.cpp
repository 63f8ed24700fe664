#include "despeckle/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "despeckle/error.hpp"
#include "despeckle/simd.hpp"

namespace despeckle {
namespace {

void check_mask(const DenseTensor& x, const RegionMask& m, const char* what) {
    if (m.dims != x.dims()) throw InvalidArgument(std::string(what) + " mask does not match the volume");
    if (m.count() == 0) throw InvalidInput(std::string(what) + " region is empty");
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
    double max = -std::numeric_limits<double>::infinity();
};

Moments moments(const DenseTensor& x, const RegionMask& m) {
    const auto v = x.data();
    long double s = 0;
    std::size_t n = 0;
    Moments out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (m.inside[i]) {
            s += v[i];
            ++n;
            out.max = std::max(out.max, v[i]);
        }
    out.mean = static_cast<double>(s / n);
    long double ss = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (m.inside[i]) {
            const long double d = v[i] - out.mean;
            ss += d * d;
        }
    out.sd = std::sqrt(static_cast<double>(ss / n));
    return out;
}

long round_half_away(double v) { return static_cast<long>(std::floor(std::abs(v) + 0.5)) * (v < 0 ? -1 : 1); }

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
    throw FormatError(FormatErrorKind::parse, "line " + std::to_string(line) + ": " + what);
}

// Numeric CSV rows with exactly `fields` columns; comments and a header skipped.
std::vector<std::vector<double>> read_rows(std::istream& in, std::size_t fields) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const char c = line[first];
        if (rows.empty() && !(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.'))
            continue;  // header
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                parse_error(no, "not a number: '" + cell + "'");
            }
            if (cell.find_first_not_of(" \t", used) != std::string::npos) parse_error(no, "trailing characters");
            if (!std::isfinite(v)) parse_error(no, "non-finite value");
            row.push_back(v);
        }
        if (row.size() != fields) parse_error(no, "expected " + std::to_string(fields) + " fields");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::size_t as_index(double v, std::size_t bound, std::size_t row) {
    if (v != std::floor(v) || v < 1 || v > static_cast<double>(bound))
        throw FormatError(FormatErrorKind::parse,
                          "row " + std::to_string(row) + ": index out of range 1.." + std::to_string(bound));
    return static_cast<std::size_t>(v) - 1;
}

std::ifstream open(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(FormatErrorKind::io, "cannot open " + path);
    return f;
}

} // namespace

double relative_error(const DenseTensor& x, const DenseTensor& xhat) {
    if (x.dims() != xhat.dims()) throw InvalidArgument("relative_error: shape mismatch");
    const double nx = std::sqrt(simd::sum_squares(x.size(), x.data().data()));
    if (nx == 0.0) throw InvalidInput("relative_error: reference has zero norm");
    return std::sqrt(simd::diff_sum_squares(x.size(), x.data().data(), xhat.data().data())) / nx;
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](std::uint8_t v) { return v != 0; }));
}

RegionMask box_mask(const Dims& dims, const std::vector<std::size_t>& lo, const std::vector<std::size_t>& hi) {
    if (lo.size() != dims.size() || hi.size() != dims.size()) throw InvalidArgument("box_mask: bounds per mode");
    for (std::size_t m = 0; m < dims.size(); ++m)
        if (lo[m] >= hi[m] || hi[m] > dims[m]) throw InvalidArgument("box_mask: empty or out-of-range box");
    RegionMask mask(dims);
    std::vector<std::size_t> idx(lo);
    for (;;) {
        std::size_t off = 0, stride = 1;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            off += idx[m] * stride;
            stride *= dims[m];
        }
        mask.inside[off] = 1;
        std::size_t m = 0;
        for (; m < dims.size(); ++m) {
            if (++idx[m] < hi[m]) break;
            idx[m] = lo[m];
        }
        if (m == dims.size()) break;
    }
    return mask;
}

double cnr(const DenseTensor& x, const RegionMask& region) {
    check_mask(x, region, "cnr");
    const Moments m = moments(x, region);
    if (m.sd == 0.0) throw InvalidInput("cnr: region has zero variance");
    return m.mean / m.sd;
}

double snr(const DenseTensor& x, const RegionMask& signal, const RegionMask& background) {
    check_mask(x, signal, "signal");
    check_mask(x, background, "background");
    const double peak = moments(x, signal).max;
    const double sd = moments(x, background).sd;
    if (sd == 0.0) throw InvalidInput("snr: background has zero variance");
    if (!(peak > 0.0)) throw InvalidInput("snr: signal maximum must be positive");
    return 20.0 * std::log10(peak / sd);
}

double SurfaceSet::thickness(std::size_t i2, std::size_t i3) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t l = 0; l < surfaces; ++l) {
        lo = std::min(lo, at(i2, i3, l));
        hi = std::max(hi, at(i2, i3, l));
    }
    return hi - lo;
}

double segmentation_error(const SurfaceSet& automatic, const SurfaceSet& manual,
                          const std::vector<std::size_t>& subset) {
    if (automatic.bscan_width != manual.bscan_width || automatic.bscans != manual.bscans ||
        automatic.surfaces != manual.surfaces)
        throw InvalidArgument("segmentation_error: surface sets differ in shape");
    if (subset.empty() || manual.surfaces == 0 || manual.bscan_width == 0)
        throw InvalidArgument("segmentation_error: nothing to compare");
    long double sum = 0;
    for (std::size_t b : subset) {
        if (b < 1 || b > manual.bscans) throw InvalidArgument("segmentation_error: B-scan index out of range");
        for (std::size_t i2 = 0; i2 < manual.bscan_width; ++i2) {
            const double t = manual.thickness(i2, b - 1);
            if (!(t > 0.0)) throw InvalidInput("segmentation_error: zero thickness in the manual set");
            for (std::size_t l = 0; l < manual.surfaces; ++l)
                sum += std::abs(automatic.at(i2, b - 1, l) - manual.at(i2, b - 1, l)) / t;
        }
    }
    return static_cast<double>(sum / (static_cast<long double>(manual.bscan_width) * subset.size() * manual.surfaces));
}

std::vector<long> alignment_shifts(std::size_t depth, const std::vector<std::vector<double>>& heights) {
    std::vector<double> mean(heights.size());
    double total = 0.0;
    for (std::size_t b = 0; b < heights.size(); ++b) {
        if (heights[b].empty()) throw InvalidArgument("align_bscans: missing boundary heights for a B-scan");
        double s = 0.0;
        for (double h : heights[b]) {
            if (!std::isfinite(h)) throw InvalidInput("align_bscans: non-finite boundary height");
            s += h;
        }
        mean[b] = s / heights[b].size();
        total += mean[b];
    }
    const long ref = round_half_away(total / heights.size());
    std::vector<long> shift(heights.size());
    for (std::size_t b = 0; b < heights.size(); ++b) {
        shift[b] = ref - round_half_away(mean[b]);
        if (static_cast<std::size_t>(std::abs(shift[b])) >= depth)
            throw InvalidArgument("align_bscans: shift exceeds the volume height");
    }
    return shift;
}

DenseTensor align_bscans(const DenseTensor& x, const std::vector<std::vector<double>>& heights) {
    if (x.order() != 3) throw InvalidArgument("align_bscans: expected a 3-way volume");
    const std::size_t i1 = x.dim(0), i2 = x.dim(1), i3 = x.dim(2);
    if (heights.size() != i3) throw InvalidArgument("align_bscans: need boundary heights for every B-scan");
    const std::vector<long> shift = alignment_shifts(i1, heights);
    std::vector<double> out(x.size(), 0.0);
    const auto in = x.data();
    for (std::size_t b = 0; b < i3; ++b)
        for (std::size_t c = 0; c < i2; ++c) {
            const std::size_t col = i1 * (c + i2 * b);
            for (std::size_t r = 0; r < i1; ++r) {
                const long dst = static_cast<long>(r) + shift[b];
                if (dst >= 0 && dst < static_cast<long>(i1)) out[col + dst] = in[col + r];
            }
        }
    return DenseTensor(x.dims(), std::move(out));
}

RegionMask read_mask_csv(std::istream& in, const Dims& dims) {
    if (dims.size() != 3) throw InvalidArgument("read_mask_csv: masks are defined for 3-way volumes");
    RegionMask mask(dims);
    std::size_t line = 0;
    for (const auto& row : read_rows(in, 3)) {
        ++line;
        const std::size_t a = as_index(row[0], dims[0], line), b = as_index(row[1], dims[1], line),
                          c = as_index(row[2], dims[2], line);
        mask.inside[a + dims[0] * (b + dims[1] * c)] = 1;
    }
    return mask;
}

RegionMask read_mask_csv(const std::string& path, const Dims& dims) {
    std::ifstream f = open(path);
    return read_mask_csv(f, dims);
}

SurfaceSet read_surfaces_csv(std::istream& in) {
    const auto rows = read_rows(in, 4);
    if (rows.empty()) throw FormatError(FormatErrorKind::parse, "no surface rows");
    double n2 = 0, n3 = 0, nl = 0;
    for (const auto& r : rows) {
        n2 = std::max(n2, r[0]);
        n3 = std::max(n3, r[1]);
        nl = std::max(nl, r[2]);
    }
    if (std::max({n2, n3, nl}) > static_cast<double>(rows.size()) || std::min({n2, n3, nl}) < 1)
        throw FormatError(FormatErrorKind::parse, "surface grid is incomplete or duplicated");
    const std::size_t cells = static_cast<std::size_t>(n2) * static_cast<std::size_t>(n3) * static_cast<std::size_t>(nl);
    if (cells != rows.size()) throw FormatError(FormatErrorKind::parse, "surface grid is incomplete or duplicated");
    SurfaceSet s(static_cast<std::size_t>(n2), static_cast<std::size_t>(n3), static_cast<std::size_t>(nl));
    std::vector<std::uint8_t> seen(cells, 0);
    std::size_t line = 0;
    for (const auto& r : rows) {
        ++line;
        const std::size_t a = as_index(r[0], s.bscan_width, line), b = as_index(r[1], s.bscans, line),
                          l = as_index(r[2], s.surfaces, line);
        const std::size_t k = a + s.bscan_width * (b + s.bscans * l);
        if (seen[k]) throw FormatError(FormatErrorKind::parse, "row " + std::to_string(line) + ": duplicate cell");
        seen[k] = 1;
        s.position[k] = r[3];
    }
    return s;
}

SurfaceSet read_surfaces_csv(const std::string& path) {
    std::ifstream f = open(path);
    return read_surfaces_csv(f);
}

} // namespace despeckle
