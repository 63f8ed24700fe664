#pragma once

// Compression-ratio bookkeeping, rank correction, penalty calibration and the
// two end-to-end de-speckling + compression pipelines (TT and Tucker/ML).

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "despeckle/admm.hpp"
#include "despeckle/decomp.hpp"
#include "despeckle/prox.hpp"
#include "despeckle/tensor.hpp"

namespace despeckle {

enum class Mode { tt, ml };

const char* to_string(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view s) noexcept;

// Raw element count over model parameter count; dims must be 3-way.
double cr_tt(std::span<const std::size_t> dims, std::size_t r1, std::size_t r2);
double cr_ml(std::span<const std::size_t> dims, std::size_t r1, std::size_t r2, std::size_t r3);
double cr_of(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks);

struct RankCorrection {
    std::vector<std::size_t> ranks;
    std::size_t corrected = 0;  // 1-based index of the adjusted rank, 0 if unchanged
    bool reachable = true;      // target lies within the CR range of valid ranks
    bool improved = true;       // |CR - target| did not grow (true when unchanged)
    bool clamped = false;       // the solved rank fell outside its feasible range
    std::size_t passes = 0;     // single passes applied (correct_ranks)
};

// One correction pass: when CR is below target the largest rank is solved for,
// when above the smallest (lowest index on ties); the result is rounded and
// clamped to its feasible range. For TT that is [1, min(I1, I2 I3)] and
// [1, min(I2, I3)]; a multilinear rank additionally keeps R_n <= prod of the
// other two ranks.
RankCorrection correct_tt_rank(std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                               double target_cr);
RankCorrection correct_ml_rank(std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                               double target_cr);

// Repeats the single pass while the solved rank was clamped, each time choosing
// among the ranks that can still move toward the target. Equals one pass when
// the first solve lands inside the feasible range.
RankCorrection correct_ranks(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                             double target_cr);

// --- penalty calibration ------------------------------------------------------

struct CalibrationSample {
    double cr = 0.0;
    double mu0 = 0.0;
    double mu_max = 0.0;
};

class CalibrationTable {
public:
    // Samples are sorted by cr, which must be strictly increasing and positive.
    void set(Mode mode, SpNorm norm, std::vector<CalibrationSample> samples);
    const std::vector<CalibrationSample>* find(Mode mode, SpNorm norm) const;
    bool empty() const noexcept { return lists_.empty(); }

    // One "mode=tt norm=s1 cr=... mu0=... mu_max=..." record per line, sorted
    // by mode (tt, ml), norm (s0, s12, s23, s1) and cr. '#' starts a comment.
    void write(std::ostream& out) const;
    static CalibrationTable read(std::istream& in);
    void save(const std::string& path) const;
    static CalibrationTable load(const std::string& path);

    friend bool operator==(const CalibrationTable&, const CalibrationTable&);

private:
    std::map<std::pair<Mode, SpNorm>, std::vector<CalibrationSample>> lists_;
};

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes, end
// slopes by the three-point shape-preserving formula). Clamps outside [x0, xn].
double pchip(const std::vector<double>& x, const std::vector<double>& y, double q);

struct MuPair {
    double mu0 = 0.0;
    double mu_max = 0.0;
};

// Interpolates log mu0 and log mu_max over log CR. Throws InvalidArgument when
// the table has no list for (mode, norm) or fewer than two samples.
MuPair interpolate_mu(const CalibrationTable& table, Mode mode, SpNorm norm, double target_cr);

// CR of the ranks the pipeline reads off before correction.
struct InitialRanks {
    std::vector<std::size_t> ranks;
    double cr = 0.0;
    AdmmTrace trace;
};
InitialRanks initial_ranks(const DenseTensor& x, Mode mode, SpNorm norm, MuPair mu);

struct CalibrationOptions {
    std::vector<double> targets;       // sorted CR targets
    double mu_max_factor = 1e3;        // mu_max = factor * mu0
    double accept = 0.10;              // keep a knot within this relative CR error
    double refine = 0.01;              // stop refining once this close
    std::size_t grid_per_decade = 2;   // geometric grid over the threshold scale
    std::size_t max_refinements = 14;
    std::function<void(const std::string&)> log;
};

// 12 log-spaced targets in [1, 100].
std::vector<double> default_cr_targets();

std::vector<CalibrationSample> calibrate(const std::vector<DenseTensor>& volumes, Mode mode, SpNorm norm,
                                         const CalibrationOptions& opt);

// --- pipelines ------------------------------------------------------------------

struct PipelineOptions {
    bool decompose_denoised = false;  // decompose the denoised tensor instead of the input
    TuckerOptions tucker;
};

struct CompressionOutcome {
    Mode mode = Mode::tt;
    SpNorm norm = SpNorm::s1;
    std::optional<TTModel> tt;
    std::optional<TuckerModel> tucker;
    DenseTensor denoised;
    double requested_cr = 0.0;
    double achieved_cr = 0.0;
    double approx_error = 0.0;  // ||X - denoised|| / ||X||
    MuPair mu;
    AdmmTrace admm_trace;
    std::vector<std::size_t> initial_ranks;
    RankCorrection correction;

    std::vector<std::size_t> ranks() const;
    DenseTensor reconstruct() const;
};

CompressionOutcome despeckle_compress_tt(const DenseTensor& x, double target_cr, SpNorm norm,
                                         const CalibrationTable& table, const PipelineOptions& opt = {});
CompressionOutcome despeckle_compress_ml(const DenseTensor& x, double target_cr, SpNorm norm,
                                         const CalibrationTable& table, const PipelineOptions& opt = {});

} // namespace despeckle
