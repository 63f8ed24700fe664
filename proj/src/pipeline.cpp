#include "despeckle/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "despeckle/error.hpp"
#include "despeckle/metrics.hpp"

namespace despeckle {
namespace {

void check_dims3(std::span<const std::size_t> dims) {
    if (dims.size() != 3) throw InvalidArgument("CR formulas are defined for 3-way tensors");
    for (std::size_t d : dims)
        if (d == 0) throw InvalidArgument("CR: zero dimension");
}

double volume(std::span<const std::size_t> d) {
    return static_cast<double>(d[0]) * static_cast<double>(d[1]) * static_cast<double>(d[2]);
}

// Lowest index among the maximal (or minimal) eligible entries.
std::size_t pick(const std::vector<std::size_t>& r, bool largest, const std::vector<bool>& eligible) {
    std::size_t best = r.size();
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!eligible[i]) continue;
        if (best == r.size() || (largest ? r[i] > r[best] : r[i] < r[best])) best = i;
    }
    return best;
}

RankCorrection finish(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& before,
                      RankCorrection c, const std::vector<std::size_t>& bound, double target) {
    const double lo = cr_of(mode, dims, bound);
    const double hi = cr_of(mode, dims, std::vector<std::size_t>(before.size(), 1));
    c.reachable = target >= lo && target <= hi;
    c.improved = std::abs(cr_of(mode, dims, c.ranks) - target) <= std::abs(cr_of(mode, dims, before) - target);
    return c;
}

void check_ranks(const std::vector<std::size_t>& r, std::size_t n, const char* who) {
    if (r.size() != n) throw InvalidArgument(std::string(who) + ": wrong number of ranks");
    for (std::size_t v : r)
        if (v == 0) throw InvalidArgument(std::string(who) + ": ranks must be positive");
}

std::vector<std::size_t> tt_bounds(std::span<const std::size_t> d) {
    return {std::min(d[0], d[1] * d[2]), std::min(d[1], d[2])};
}

std::vector<std::size_t> ml_bounds(std::span<const std::size_t> d) {
    return {std::min(d[0], d[1] * d[2]), std::min(d[1], d[0] * d[2]), std::min(d[2], d[0] * d[1])};
}

// Inverse of prox_threshold in tau (monotone increasing).
double tau_for_threshold(double phi, SpNorm norm) {
    double lo = 1e-300, hi = 1.0;
    while (prox_threshold(hi, norm) < phi) hi *= 2.0;
    for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-14; ++i) {
        const double mid = std::sqrt(lo * hi);
        (prox_threshold(mid, norm) < phi ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

} // namespace

const char* to_string(Mode m) noexcept { return m == Mode::tt ? "tt" : "ml"; }

std::optional<Mode> parse_mode(std::string_view s) noexcept {
    if (s == "tt") return Mode::tt;
    if (s == "ml") return Mode::ml;
    return std::nullopt;
}

double cr_tt(std::span<const std::size_t> dims, std::size_t r1, std::size_t r2) {
    check_dims3(dims);
    if (r1 == 0 || r2 == 0) throw InvalidArgument("cr_tt: ranks must be positive");
    const double a = static_cast<double>(r1), b = static_cast<double>(r2);
    return volume(dims) / (dims[0] * a + a * dims[1] * b + b * dims[2]);
}

double cr_ml(std::span<const std::size_t> dims, std::size_t r1, std::size_t r2, std::size_t r3) {
    check_dims3(dims);
    if (r1 == 0 || r2 == 0 || r3 == 0) throw InvalidArgument("cr_ml: ranks must be positive");
    const double a = static_cast<double>(r1), b = static_cast<double>(r2), c = static_cast<double>(r3);
    return volume(dims) / (a * b * c + dims[0] * a + dims[1] * b + dims[2] * c);
}

double cr_of(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& r) {
    if (mode == Mode::tt) {
        check_ranks(r, 2, "cr_tt");
        return cr_tt(dims, r[0], r[1]);
    }
    check_ranks(r, 3, "cr_ml");
    return cr_ml(dims, r[0], r[1], r[2]);
}

namespace {

// Rank i solved so that the CR equals target with the others fixed.
double solve_rank(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& r, std::size_t i,
                  double target) {
    const double n = volume(dims), i1 = dims[0], i2 = dims[1], i3 = dims[2];
    if (mode == Mode::tt) {
        const double r1 = r[0], r2 = r[1];
        if (i == 0) return (n - target * r2 * i3) / (target * i1 + target * i2 * r2);
        return (n - target * r1 * i1) / (target * i3 + target * i2 * r1);
    }
    const double r1 = r[0], r2 = r[1], r3 = r[2];
    if (i == 0) return (n - target * r2 * i2 - target * i3 * r3) / (target * r2 * r3 + target * i1);
    if (i == 1) return (n - target * i1 * r1 - target * i3 * r3) / (target * r1 * r3 + target * i2);
    return (n - target * i1 * r1 - target * i2 * r2) / (target * r1 * r2 + target * i3);
}

// Values rank i may take with the others fixed. A multilinear rank also needs
// R_n <= prod of the other ranks for every n.
std::pair<std::size_t, std::size_t> rank_range(Mode mode, std::span<const std::size_t> dims,
                                               const std::vector<std::size_t>& r, std::size_t i) {
    if (mode == Mode::tt) return {1, tt_bounds(dims)[i]};
    const std::size_t j = (i + 1) % 3, k = (i + 2) % 3;
    const std::size_t hi = std::min(ml_bounds(dims)[i], r[j] * r[k]);
    const std::size_t lo = std::max({std::size_t{1}, (r[j] + r[k] - 1) / r[k], (r[k] + r[j] - 1) / r[j]});
    return {std::min(lo, hi), hi};
}

RankCorrection correct_once(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                            double target, const std::vector<bool>& eligible) {
    RankCorrection c;
    c.ranks = ranks;
    const double now = cr_of(mode, dims, ranks);
    if (now == target) return c;
    const std::size_t i = pick(ranks, now < target, eligible);
    if (i == ranks.size()) return c;
    const auto [lo, hi] = rank_range(mode, dims, ranks, i);
    const double v = std::round(solve_rank(mode, dims, ranks, i, target));
    c.clamped = !(v >= static_cast<double>(lo) && v <= static_cast<double>(hi));
    c.ranks[i] = v >= static_cast<double>(hi) ? hi : v <= static_cast<double>(lo) ? lo : static_cast<std::size_t>(v);
    c.corrected = i + 1;
    return c;
}

void check_target(double target, const char* who) {
    if (!(target > 0.0) || !std::isfinite(target)) throw InvalidArgument(std::string(who) + ": target must be positive");
}

} // namespace

RankCorrection correct_tt_rank(std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                               double target) {
    check_dims3(dims);
    check_ranks(ranks, 2, "correct_tt_rank");
    check_target(target, "correct_tt_rank");
    RankCorrection c = correct_once(Mode::tt, dims, ranks, target, {true, true});
    return finish(Mode::tt, dims, ranks, std::move(c), tt_bounds(dims), target);
}

RankCorrection correct_ml_rank(std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                               double target) {
    check_dims3(dims);
    check_ranks(ranks, 3, "correct_ml_rank");
    check_target(target, "correct_ml_rank");
    RankCorrection c = correct_once(Mode::ml, dims, ranks, target, {true, true, true});
    return finish(Mode::ml, dims, ranks, std::move(c), ml_bounds(dims), target);
}

RankCorrection correct_ranks(Mode mode, std::span<const std::size_t> dims, const std::vector<std::size_t>& ranks,
                             double target) {
    check_dims3(dims);
    check_ranks(ranks, mode == Mode::tt ? 2 : 3, "correct_ranks");
    check_target(target, "correct_ranks");
    RankCorrection c;
    c.ranks = ranks;
    for (std::size_t pass = 0; pass < 4 * ranks.size(); ++pass) {
        const bool grow = cr_of(mode, dims, c.ranks) > target;
        std::vector<bool> eligible(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            const auto [lo, hi] = rank_range(mode, dims, c.ranks, i);
            eligible[i] = grow ? c.ranks[i] < hi : c.ranks[i] > lo;
        }
        const RankCorrection step = correct_once(mode, dims, c.ranks, target, eligible);
        if (step.ranks == c.ranks) break;
        c.ranks = step.ranks;
        c.corrected = step.corrected;
        c.clamped = step.clamped;
        ++c.passes;
        if (!step.clamped) break;
    }
    if (c.passes == 0) c.passes = c.corrected == 0 ? 0 : 1;
    return finish(mode, dims, ranks, std::move(c), mode == Mode::tt ? tt_bounds(dims) : ml_bounds(dims), target);
}

// --- calibration table -----------------------------------------------------------

void CalibrationTable::set(Mode mode, SpNorm norm, std::vector<CalibrationSample> s) {
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.cr < b.cr; });
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i].cr > 0.0 && s[i].mu0 > 0.0 && s[i].mu_max > 0.0) || !std::isfinite(s[i].cr) ||
            !std::isfinite(s[i].mu0) || !std::isfinite(s[i].mu_max))
            throw InvalidArgument("calibration samples must be positive and finite");
        if (i > 0 && s[i].cr == s[i - 1].cr) throw InvalidArgument("calibration CR values must be distinct");
    }
    lists_[{mode, norm}] = std::move(s);
}

const std::vector<CalibrationSample>* CalibrationTable::find(Mode mode, SpNorm norm) const {
    const auto it = lists_.find({mode, norm});
    return it == lists_.end() ? nullptr : &it->second;
}

void CalibrationTable::write(std::ostream& out) const {
    for (const auto& [key, list] : lists_)
        for (const auto& s : list)
            out << "mode=" << to_string(key.first) << " norm=" << to_string(key.second) << " cr=" << fmt(s.cr)
                << " mu0=" << fmt(s.mu0) << " mu_max=" << fmt(s.mu_max) << '\n';
}

CalibrationTable CalibrationTable::read(std::istream& in) {
    std::map<std::pair<Mode, SpNorm>, std::vector<CalibrationSample>> lists;
    std::string line;
    std::size_t no = 0;
    auto fail = [&](const std::string& what) {
        throw FormatError(FormatErrorKind::parse, "calibration line " + std::to_string(no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ss(line);
        std::string tok;
        std::map<std::string, std::string> kv;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0) fail("expected key=value, got '" + tok + "'");
            if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) fail("duplicate key");
        }
        if (kv.empty()) continue;
        for (const char* k : {"mode", "norm", "cr", "mu0", "mu_max"})
            if (!kv.count(k)) fail(std::string("missing ") + k);
        if (kv.size() != 5) fail("unknown key");
        const auto mode = parse_mode(kv["mode"]);
        const auto norm = parse_norm(kv["norm"]);
        if (!mode) fail("unknown mode");
        if (!norm) fail("unknown norm");
        CalibrationSample s;
        double* slots[] = {&s.cr, &s.mu0, &s.mu_max};
        const char* keys[] = {"cr", "mu0", "mu_max"};
        for (int i = 0; i < 3; ++i) {
            std::size_t used = 0;
            try {
                *slots[i] = std::stod(kv[keys[i]], &used);
            } catch (const std::exception&) {
                fail(std::string("bad number for ") + keys[i]);
            }
            if (used != kv[keys[i]].size()) fail(std::string("bad number for ") + keys[i]);
        }
        lists[{*mode, *norm}].push_back(s);
    }
    CalibrationTable t;
    for (auto& [key, list] : lists) {
        try {
            t.set(key.first, key.second, std::move(list));
        } catch (const InvalidArgument& e) {
            throw FormatError(FormatErrorKind::parse, e.what());
        }
    }
    return t;
}

void CalibrationTable::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw FormatError(FormatErrorKind::io, "cannot write " + path);
    write(f);
    if (!f) throw FormatError(FormatErrorKind::io, "write failed: " + path);
}

CalibrationTable CalibrationTable::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(FormatErrorKind::io, "cannot open " + path);
    return read(f);
}

bool operator==(const CalibrationTable& a, const CalibrationTable& b) {
    if (a.lists_.size() != b.lists_.size()) return false;
    for (const auto& [key, list] : a.lists_) {
        const auto* other = b.find(key.first, key.second);
        if (!other || other->size() != list.size()) return false;
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].cr != (*other)[i].cr || list[i].mu0 != (*other)[i].mu0 ||
                list[i].mu_max != (*other)[i].mu_max)
                return false;
    }
    return true;
}

// --- interpolation -------------------------------------------------------------------

double pchip(const std::vector<double>& x, const std::vector<double>& y, double q) {
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n) throw InvalidArgument("pchip: need matching, nonempty knot vectors");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x[i] > x[i - 1])) throw InvalidArgument("pchip: knots must be strictly increasing");
    if (n == 1 || q <= x.front()) return y.front();
    if (q >= x.back()) return y.back();

    std::vector<double> h(n - 1), del(n - 1), d(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        del[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = del[0];
    } else {
        for (std::size_t k = 1; k + 1 < n; ++k) {
            if (del[k - 1] * del[k] <= 0.0) continue;
            const double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
        auto end_slope = [](double h0, double h1, double d0, double d1) {
            double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if (std::signbit(s) != std::signbit(d0) || d0 == 0.0) s = 0.0;
            else if (std::signbit(d0) != std::signbit(d1) && std::abs(s) > 3.0 * std::abs(d0)) s = 3.0 * d0;
            return s;
        };
        d[0] = end_slope(h[0], h[1], del[0], del[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    }
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), q) - x.begin()) - 1;
    const double t = (q - x[k]) / h[k];
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y[k] + (t3 - 2 * t2 + t) * h[k] * d[k] + (-2 * t3 + 3 * t2) * y[k + 1] +
           (t3 - t2) * h[k] * d[k + 1];
}

MuPair interpolate_mu(const CalibrationTable& table, Mode mode, SpNorm norm, double target_cr) {
    const auto* list = table.find(mode, norm);
    if (!list || list->size() < 2)
        throw InvalidArgument(std::string("calibration table has no usable entry for mode=") + to_string(mode) +
                              " norm=" + to_string(norm));
    if (!(target_cr > 0.0)) throw InvalidArgument("interpolate_mu: target CR must be positive");
    std::vector<double> x, y0, y1;
    for (const auto& s : *list) {
        x.push_back(std::log(s.cr));
        y0.push_back(std::log(s.mu0));
        y1.push_back(std::log(s.mu_max));
    }
    const double q = std::log(target_cr);
    MuPair mu{std::exp(pchip(x, y0, q)), std::exp(pchip(x, y1, q))};
    mu.mu_max = std::max(mu.mu_max, mu.mu0);
    return mu;
}

// --- pipeline pieces -------------------------------------------------------------------

InitialRanks initial_ranks(const DenseTensor& x, Mode mode, SpNorm norm, MuPair mu) {
    if (x.order() != 3) throw InvalidArgument("pipelines expect a 3-way volume");
    InitialRanks out;
    if (mode == Mode::tt) {
        auto d = denoise_tt(x, AdmmConfig::tt_defaults(norm, mu.mu0, mu.mu_max));
        const double eps = std::clamp(relative_error(x, d.denoised), 1e-14, 1.0 - 1e-9);
        out.ranks = tt_svd_eps(x, eps).ranks();
        out.trace = std::move(d.trace);
    } else {
        auto d = denoise_ml(x, AdmmConfig::ml_defaults(norm, mu.mu0, mu.mu_max));
        out.ranks = d.ranks.ranks;
        for (auto& r : out.ranks) r = std::max<std::size_t>(r, 1);
        out.trace = std::move(d.trace);
    }
    out.cr = cr_of(mode, x.dims(), out.ranks);
    return out;
}

std::vector<double> default_cr_targets() {
    std::vector<double> t(12);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::pow(10.0, 2.0 * static_cast<double>(i) / 11.0);
    return t;
}

std::vector<CalibrationSample> calibrate(const std::vector<DenseTensor>& volumes, Mode mode, SpNorm norm,
                                         const CalibrationOptions& opt) {
    if (volumes.empty()) throw InvalidArgument("calibrate: need at least one volume");
    if (!std::is_sorted(opt.targets.begin(), opt.targets.end()))
        throw InvalidArgument("calibrate: targets must be sorted");
    for (double t : opt.targets)
        if (!(t > 0.0)) throw InvalidArgument("calibrate: targets must be positive");
    if (!(opt.mu_max_factor >= 1.0)) throw InvalidArgument("calibrate: mu_max factor must be >= 1");
    if (opt.targets.empty()) return {};

    // Penalties are scanned on a geometric grid of thresholds relative to the
    // data scale, from above the largest singular value down to 1e-4 of it.
    double scale = 0.0;
    for (const auto& v : volumes) scale += frobenius_norm(v);
    scale /= volumes.size();
    if (!(scale > 0.0)) throw InvalidInput("calibrate: volumes are all zero");
    const auto& d0 = volumes.front().dims();
    const auto w = mode == Mode::tt ? tt_weights(d0) : ml_weights(d0);
    const double alpha = *std::max_element(w.begin(), w.end());

    std::map<double, double> seen;  // mu0 -> mean CR
    auto response = [&](double mu0) {
        if (const auto it = seen.find(mu0); it != seen.end()) return it->second;
        double s = 0.0;
        for (const auto& v : volumes) s += initial_ranks(v, mode, norm, {mu0, opt.mu_max_factor * mu0}).cr;
        const double cr = s / volumes.size();
        seen.emplace(mu0, cr);
        if (opt.log) opt.log("mu0=" + fmt(mu0) + " cr=" + fmt(cr));
        return cr;
    };

    std::vector<double> grid;
    const std::size_t steps = 4 * opt.grid_per_decade + 1;
    for (std::size_t i = 0; i <= steps; ++i) {
        const double phi = 2.0 * scale * std::pow(10.0, -static_cast<double>(i) / opt.grid_per_decade);
        grid.push_back(alpha / tau_for_threshold(phi, norm));
    }
    std::vector<double> crs;
    for (double mu : grid) crs.push_back(response(mu));
    if (opt.log)
        opt.log(std::string("CR ") + (crs.back() < crs.front() ? "decreases" : "increases") + " with mu0");

    std::vector<CalibrationSample> out;
    for (double target : opt.targets) {
        std::size_t k = grid.size();
        for (std::size_t i = 0; i + 1 < grid.size(); ++i)
            if ((crs[i] - target) * (crs[i + 1] - target) <= 0.0) {
                k = i;
                break;
            }
        if (k == grid.size()) {
            if (opt.log) opt.log("target " + fmt(target) + " not bracketed; knot omitted");
            continue;
        }
        double lo = grid[k], hi = grid[k + 1];
        double best = std::abs(crs[k] - target) < std::abs(crs[k + 1] - target) ? lo : hi;
        for (std::size_t it = 0; it < opt.max_refinements; ++it) {
            if (std::abs(response(best) - target) <= opt.refine * target) break;
            // The response is a step function of mu0 (integer ranks); a narrow
            // bracket means the target sits on a jump.
            if (hi / lo < 1.0 + 1e-3) break;
            const double mid = std::sqrt(lo * hi);
            const double c = response(mid);
            if (std::abs(c - target) < std::abs(response(best) - target)) best = mid;
            ((response(lo) - target) * (c - target) <= 0.0 ? hi : lo) = mid;
        }
        const double cr = response(best);
        if (std::abs(cr - target) > opt.accept * target) {
            if (opt.log) opt.log("target " + fmt(target) + " missed (best " + fmt(cr) + "); knot omitted");
            continue;
        }
        const bool dup = std::any_of(out.begin(), out.end(), [&](const auto& s) { return s.cr == cr; });
        if (!dup) out.push_back({cr, best, opt.mu_max_factor * best});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.cr < b.cr; });
    return out;
}

std::vector<std::size_t> CompressionOutcome::ranks() const {
    if (tt) return tt->ranks();
    if (tucker) return tucker->ranks();
    return {};
}

DenseTensor CompressionOutcome::reconstruct() const {
    if (tt) return tt_reconstruct(*tt);
    if (tucker) return tucker_reconstruct(*tucker);
    throw InvalidArgument("compression outcome holds no model");
}

CompressionOutcome despeckle_compress_tt(const DenseTensor& x, double target_cr, SpNorm norm,
                                         const CalibrationTable& table, const PipelineOptions& opt) {
    if (x.order() != 3) throw InvalidArgument("despeckle_compress_tt: expected a 3-way volume");
    if (!(target_cr > 1.0) || !std::isfinite(target_cr)) throw InvalidInput("target CR must exceed 1");
    CompressionOutcome o;
    o.mode = Mode::tt;
    o.norm = norm;
    o.requested_cr = target_cr;
    o.mu = interpolate_mu(table, Mode::tt, norm, target_cr);

    auto d = denoise_tt(x, AdmmConfig::tt_defaults(norm, o.mu.mu0, o.mu.mu_max));
    o.admm_trace = std::move(d.trace);
    o.denoised = std::move(d.denoised);
    o.approx_error = relative_error(x, o.denoised);

    const DenseTensor& source = opt.decompose_denoised ? o.denoised : x;
    const double eps = std::clamp(o.approx_error, 1e-14, 1.0 - 1e-9);
    o.initial_ranks = tt_svd_eps(source, eps).ranks();
    o.correction = correct_ranks(Mode::tt, x.dims(), o.initial_ranks, target_cr);
    o.tt = tt_svd_ranks(source, o.correction.ranks);
    o.achieved_cr = cr_of(Mode::tt, x.dims(), o.tt->ranks());
    return o;
}

CompressionOutcome despeckle_compress_ml(const DenseTensor& x, double target_cr, SpNorm norm,
                                         const CalibrationTable& table, const PipelineOptions& opt) {
    if (x.order() != 3) throw InvalidArgument("despeckle_compress_ml: expected a 3-way volume");
    if (!(target_cr > 1.0) || !std::isfinite(target_cr)) throw InvalidInput("target CR must exceed 1");
    CompressionOutcome o;
    o.mode = Mode::ml;
    o.norm = norm;
    o.requested_cr = target_cr;
    o.mu = interpolate_mu(table, Mode::ml, norm, target_cr);

    auto d = denoise_ml(x, AdmmConfig::ml_defaults(norm, o.mu.mu0, o.mu.mu_max));
    o.admm_trace = std::move(d.trace);
    o.denoised = std::move(d.denoised);
    o.approx_error = relative_error(x, o.denoised);

    o.initial_ranks = d.ranks.ranks;
    for (auto& r : o.initial_ranks) r = std::max<std::size_t>(r, 1);
    o.correction = correct_ranks(Mode::ml, x.dims(), o.initial_ranks, target_cr);
    const DenseTensor& source = opt.decompose_denoised ? o.denoised : x;
    o.tucker = tucker_als(source, o.correction.ranks, opt.tucker);
    o.achieved_cr = cr_of(Mode::ml, x.dims(), o.tucker->ranks());
    return o;
}

} // namespace despeckle
