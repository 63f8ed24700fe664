#include "despeckle/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <new>
#include <sstream>

#include <CLI11.hpp>

#include "despeckle/error.hpp"
#include "despeckle/io.hpp"
#include "despeckle/metrics.hpp"
#include "despeckle/pipeline.hpp"

namespace despeckle {
namespace {

struct Usage : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

Mode mode_arg(const std::string& s) {
    const auto m = parse_mode(s);
    if (!m) throw Usage("unknown mode '" + s + "' (expected tt or ml)");
    return *m;
}

SpNorm norm_arg(const std::string& s) {
    const auto n = parse_norm(s);
    if (!n) throw Usage("unknown norm '" + s + "' (expected s0, s12, s23 or s1)");
    return *n;
}

ElementType element_arg(bool f32) { return f32 ? ElementType::f32 : ElementType::f64; }

std::string join(const std::vector<std::size_t>& v, const char* sep = " ") {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? sep : "") << v[i];
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report_trace(std::ostream& out, const AdmmTrace& t) {
    out << "admm_iterations: " << t.iterations << "\n"
        << "admm_converged: " << (t.converged ? "yes" : "no") << "\n"
        << "admm_rel_change: " << (t.rel_change.empty() ? 0.0 : t.rel_change.back()) << "\n";
}

// --- subcommands ---------------------------------------------------------------

struct CalibrateArgs {
    std::string mode, norm, out;
    std::vector<double> targets;
    std::vector<std::string> volumes;
    double factor = 1e3;
    double refine = 0.01;
    bool verbose = false;
};

int do_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
    const Mode mode = mode_arg(a.mode);
    const SpNorm norm = norm_arg(a.norm);
    std::vector<DenseTensor> vols;
    for (const auto& p : a.volumes) vols.push_back(read_volume(p));
    CalibrationOptions opt;
    opt.targets = a.targets.empty() ? default_cr_targets() : a.targets;
    std::sort(opt.targets.begin(), opt.targets.end());
    opt.mu_max_factor = a.factor;
    opt.refine = a.refine;
    if (a.verbose) opt.log = [&err](const std::string& s) { err << s << std::endl; };
    const auto samples = calibrate(vols, mode, norm, opt);
    CalibrationTable table;
    if (std::filesystem::exists(a.out)) table = CalibrationTable::load(a.out);
    table.set(mode, norm, samples);
    table.save(a.out);
    out << "knots: " << samples.size() << " of " << opt.targets.size() << "\n";
    for (const auto& s : samples) out << "cr=" << s.cr << " mu0=" << s.mu0 << " mu_max=" << s.mu_max << "\n";
    return exit_ok;
}

struct CompressArgs {
    std::string mode, norm, table, in, out;
    double cr = 0.0;
    bool decompose_denoised = false;
};

int do_compress(const CompressArgs& a, std::ostream& out) {
    const Mode mode = mode_arg(a.mode);
    const SpNorm norm = norm_arg(a.norm);
    const CalibrationTable table = CalibrationTable::load(a.table);
    const DenseTensor x = read_volume(a.in);
    PipelineOptions opt;
    opt.decompose_denoised = a.decompose_denoised;
    const auto t0 = std::chrono::steady_clock::now();
    const CompressionOutcome o = mode == Mode::tt ? despeckle_compress_tt(x, a.cr, norm, table, opt)
                                                  : despeckle_compress_ml(x, a.cr, norm, table, opt);
    const double secs = seconds_since(t0);
    const StoredModel m = o.tt ? make_stored(*o.tt, norm) : make_stored(*o.tucker, norm);
    write_model(m, a.out);
    out << std::setprecision(6) << "mode: " << to_string(mode) << "\nnorm: " << to_string(norm)
        << "\nmu0: " << o.mu.mu0 << "\nmu_max: " << o.mu.mu_max << "\ninitial_ranks: " << join(o.initial_ranks)
        << "\ncorrection_passes: " << o.correction.passes << "\nranks: " << join(o.ranks()) << "\nrequested_cr: " << o.requested_cr
        << "\nachieved_cr: " << o.achieved_cr << "\napprox_error: " << o.approx_error << "\n";
    report_trace(out, o.admm_trace);
    out << "seconds: " << secs << "\n";
    if (!o.correction.reachable) out << "warning: requested CR is outside the range of valid ranks\n";
    return exit_ok;
}

int do_reconstruct(const std::string& in, const std::string& path, bool f32, std::ostream& out) {
    const StoredModel m = read_model(in);
    write_volume(m.reconstruct(), path, element_arg(f32));
    out << "dims: " << join(m.dims()) << "\n";
    return exit_ok;
}

struct DenoiseArgs {
    std::string mode, norm, in, out;
    double mu0 = 0.0, mu_max = 0.0, rho = 1.1;
    std::optional<double> eps_r;
    std::size_t itmax = 100;
    bool f32 = false;
};

int do_denoise(const DenoiseArgs& a, std::ostream& out) {
    const Mode mode = mode_arg(a.mode);
    const SpNorm norm = norm_arg(a.norm);
    AdmmConfig cfg = mode == Mode::tt ? AdmmConfig::tt_defaults(norm, a.mu0, a.mu_max)
                                      : AdmmConfig::ml_defaults(norm, a.mu0, a.mu_max);
    if (a.eps_r) cfg.eps_r = *a.eps_r;
    cfg.itmax = a.itmax;
    cfg.rho = a.rho;
    cfg.validate();
    const DenseTensor x = read_volume(a.in);
    const auto t0 = std::chrono::steady_clock::now();
    if (mode == Mode::tt) {
        const auto r = denoise_tt(x, cfg);
        write_volume(r.denoised, a.out, element_arg(a.f32));
        out << "ranks: " << join(r.ranks.ranks) << "\n";
        report_trace(out, r.trace);
    } else {
        const auto r = denoise_ml(x, cfg);
        write_volume(r.denoised, a.out, element_arg(a.f32));
        out << "ranks: " << join(r.ranks.ranks) << "\n";
        report_trace(out, r.trace);
    }
    out << "seconds: " << seconds_since(t0) << "\n";
    return exit_ok;
}

struct MetricsArgs {
    std::string in, ref, region, background, signal;
    std::vector<std::string> surfaces;
    std::vector<std::size_t> subset;
};

std::string cell(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream s;
    s << std::setprecision(10) << *v;
    return s.str();
}

int do_metrics(const MetricsArgs& a, std::ostream& out) {
    const DenseTensor x = read_volume(a.in);
    std::optional<double> rel, c, s, se;
    if (!a.ref.empty()) rel = relative_error(read_volume(a.ref), x);
    RegionMask all(x.dims());
    std::fill(all.inside.begin(), all.inside.end(), 1);
    const RegionMask region = a.region.empty() ? all : read_mask_csv(a.region, x.dims());
    const RegionMask signal = a.signal.empty() ? region : read_mask_csv(a.signal, x.dims());
    const RegionMask background = a.background.empty() ? region : read_mask_csv(a.background, x.dims());
    c = cnr(x, region);
    s = snr(x, signal, background);
    if (!a.surfaces.empty()) {
        const SurfaceSet automatic = read_surfaces_csv(a.surfaces[0]), manual = read_surfaces_csv(a.surfaces[1]);
        std::vector<std::size_t> subset = a.subset;
        if (subset.empty())
            for (std::size_t b = 1; b <= manual.bscans; ++b) subset.push_back(b);
        se = segmentation_error(automatic, manual, subset);
    }
    out << "relative_error,cnr,snr_db,se\n" << cell(rel) << ',' << cell(c) << ',' << cell(s) << ',' << cell(se) << "\n";
    return exit_ok;
}

struct PhantomArgs {
    std::vector<std::size_t> dims{480, 512, 64};
    std::vector<std::size_t> rank{8, 6, 4};
    double looks = 1.0;
    std::uint64_t seed = 1;
    std::string clean, noisy, region;
    bool f32 = false;
};

int do_phantom(const PhantomArgs& a, std::ostream& out) {
    SpeckledPhantomSpec spec;
    spec.dims = a.dims;
    spec.rank = a.rank;
    spec.looks = a.looks;
    spec.seed = a.seed;
    const Phantom p = make_phantom(spec);
    if (!a.clean.empty()) write_volume(p.clean, a.clean, element_arg(a.f32));
    if (!a.noisy.empty()) write_volume(p.noisy, a.noisy, element_arg(a.f32));
    if (!a.region.empty()) {
        std::ofstream f(a.region);
        if (!f) throw FormatError(FormatErrorKind::io, "cannot write " + a.region);
        f << "i1,i2,i3\n";
        for (std::size_t k = p.block_lo[2]; k < p.block_hi[2]; ++k)
            for (std::size_t j = p.block_lo[1]; j < p.block_hi[1]; ++j)
                for (std::size_t i = p.block_lo[0]; i < p.block_hi[0]; ++i)
                    f << i + 1 << ',' << j + 1 << ',' << k + 1 << '\n';
        if (!f) throw FormatError(FormatErrorKind::io, "write failed: " + a.region);
    }
    out << "dims: " << join(p.clean.dims()) << "\nhomogeneous_block:";
    for (std::size_t k = 0; k < 3; ++k) out << ' ' << p.block_lo[k] + 1 << '-' << p.block_hi[k];
    out << "\n";
    return exit_ok;
}

int do_align(const std::string& in, const std::string& heights, const std::string& path, bool f32,
             std::ostream& out) {
    const DenseTensor x = read_volume(in);
    if (x.order() != 3) throw InvalidInput("align: expected a 3-way volume");
    std::ifstream f(heights);
    if (!f) throw FormatError(FormatErrorKind::io, "cannot open " + heights);
    // Rows "i3,height" (1-based B-scan index); several rows per B-scan.
    std::vector<std::vector<double>> h(x.dim(2));
    std::string line;
    std::size_t no = 0;
    while (std::getline(f, line)) {
        ++no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#' || std::isalpha(static_cast<unsigned char>(line[first])))
            continue;
        std::istringstream ss(line);
        double b, v;
        char comma;
        if (!(ss >> b >> comma >> v) || comma != ',' || b != std::floor(b) || b < 1 || b > x.dim(2) ||
            !std::isfinite(v))
            throw FormatError(FormatErrorKind::parse, "heights line " + std::to_string(no));
        h[static_cast<std::size_t>(b) - 1].push_back(v);
    }
    const auto shifts = alignment_shifts(x.dim(0), h);
    write_volume(align_bscans(x, h), path, element_arg(f32));
    out << "shifts:";
    for (long s : shifts) out << ' ' << s;
    out << "\n";
    return exit_ok;
}

int do_info(const std::string& path, std::ostream& out) {
    const FileInfo i = inspect_file(path);
    out << std::setprecision(10) << "format: " << i.magic << "\nversion: " << i.version << "\ndims: " << join(i.dims)
        << "\n";
    if (i.element) out << "element: " << (*i.element == ElementType::f32 ? "f32" : "f64") << "\n";
    if (!i.kind.empty()) {
        out << "kind: " << i.kind << "\nnorm: " << (i.norm ? to_string(*i.norm) : "none") << "\nranks: " << join(i.ranks)
            << "\ncr: " << i.cr << "\n";
    }
    out << "bytes: " << i.bytes << "\n";
    return exit_ok;
}

const std::vector<std::string> kModes{"tt", "ml"};
const std::vector<std::string> kNorms{"s0", "s12", "s23", "s1"};

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Low-rank tensor de-speckling and compression of OCT volumes", "despeckle"};
    app.require_subcommand(1);

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit the penalty table so the pipeline hits CR targets");
    c->add_option("--mode", cal.mode)->required()->check(CLI::IsMember(kModes));
    c->add_option("--norm", cal.norm)->required()->check(CLI::IsMember(kNorms));
    c->add_option("--targets", cal.targets, "CR targets (default: 12 log-spaced in [1, 100])")->delimiter(',');
    c->add_option("--mu-max-factor", cal.factor, "mu_max = factor * mu0")->check(CLI::Range(1.0, 1e12));
    c->add_option("--refine", cal.refine, "Stop bisecting once the CR is within this relative error")
        ->check(CLI::Range(1e-6, 0.1));
    c->add_option("--out", cal.out, "Table file; an existing table is updated in place")->required();
    c->add_option("volumes", cal.volumes, "OCTV volumes")->required();
    c->add_flag("--verbose", cal.verbose, "Log every evaluation to stderr");

    CompressArgs cmp;
    auto* k = app.add_subcommand("compress", "De-speckle and compress a volume (TTML output)");
    k->add_option("--mode", cmp.mode)->required()->check(CLI::IsMember(kModes));
    k->add_option("--norm", cmp.norm)->required()->check(CLI::IsMember(kNorms));
    k->add_option("--cr", cmp.cr, "Requested compression ratio (> 1)")->required();
    k->add_option("--table", cmp.table, "Calibration table")->required();
    k->add_option("--in", cmp.in)->required();
    k->add_option("--out", cmp.out)->required();
    k->add_flag("--decompose-denoised", cmp.decompose_denoised, "Decompose the denoised tensor instead of the input");

    std::string rin, rout;
    bool rf32 = false;
    auto* r = app.add_subcommand("reconstruct", "Expand a TTML model into an OCTV volume");
    r->add_option("--in", rin)->required();
    r->add_option("--out", rout)->required();
    r->add_flag("--f32", rf32, "Write 32-bit elements");

    DenoiseArgs den;
    auto* d = app.add_subcommand("denoise", "Run the ADMM denoiser alone");
    d->add_option("--mode", den.mode)->required()->check(CLI::IsMember(kModes));
    d->add_option("--norm", den.norm)->required()->check(CLI::IsMember(kNorms));
    d->add_option("--mu0", den.mu0)->required();
    d->add_option("--mu-max", den.mu_max)->required();
    d->add_option("--eps-r", den.eps_r, "Stopping tolerance (default 1e-3 tt, 3e-3 ml)");
    d->add_option("--itmax", den.itmax);
    d->add_option("--rho", den.rho);
    d->add_option("--in", den.in)->required();
    d->add_option("--out", den.out)->required();
    d->add_flag("--f32", den.f32, "Write 32-bit elements");

    MetricsArgs met;
    auto* m = app.add_subcommand("metrics", "Quality measures as one CSV row");
    m->add_option("--in", met.in)->required();
    m->add_option("--ref", met.ref, "Reference volume for the relative error");
    m->add_option("--region", met.region, "Mask CSV for CNR (default: whole volume)");
    m->add_option("--signal", met.signal, "Mask CSV for the SNR peak (default: region)");
    m->add_option("--background", met.background, "Mask CSV for the SNR spread (default: region)");
    m->add_option("--surfaces", met.surfaces, "Automatic and manual surface CSVs")->expected(2);
    m->add_option("--bscans", met.subset, "1-based B-scans used for SE (default: all)")->delimiter(',');

    PhantomArgs ph;
    auto* p = app.add_subcommand("phantom", "Synthetic layered volume with gamma speckle");
    p->add_option("--dims", ph.dims)->expected(3);
    p->add_option("--rank", ph.rank, "Two values: TT rank; three: multilinear rank")->expected(2, 3);
    p->add_option("--looks", ph.looks);
    p->add_option("--seed", ph.seed);
    p->add_option("--out-clean", ph.clean);
    p->add_option("--out-noisy", ph.noisy);
    p->add_option("--out-region", ph.region, "Mask CSV of the largest homogeneous block");
    p->add_flag("--f32", ph.f32, "Write 32-bit elements");

    std::string ain, aheights, aout;
    bool af32 = false;
    auto* a = app.add_subcommand("align", "Shift B-scans so their boundary heights agree");
    a->add_option("--in", ain)->required();
    a->add_option("--heights", aheights, "CSV rows i3,height")->required();
    a->add_option("--out", aout)->required();
    a->add_flag("--f32", af32, "Write 32-bit elements");

    std::string iin;
    auto* i = app.add_subcommand("info", "Print header metadata of an OCTV or TTML file");
    i->add_option("--in", iin)->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return exit_usage;
    }

    try {
        if (*c) return do_calibrate(cal, out, err);
        if (*k) return do_compress(cmp, out);
        if (*r) return do_reconstruct(rin, rout, rf32, out);
        if (*d) return do_denoise(den, out);
        if (*m) return do_metrics(met, out);
        if (*p) return do_phantom(ph, out);
        if (*a) return do_align(ain, aheights, aout, af32, out);
        if (*i) return do_info(iin, out);
    } catch (const Usage& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return exit_usage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return exit_data;
    } catch (const InvalidInput& e) {
        err << "invalid input: " << e.what() << "\n";
        return exit_data;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::bad_alloc&) {
        err << "numerical failure: out of memory\n";
        return exit_numerical;
    }
    return exit_usage;
}

} // namespace despeckle
