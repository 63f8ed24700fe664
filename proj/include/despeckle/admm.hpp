#pragma once

// ADMM denoising under low TT rank (canonical unfoldings) and low multilinear
// rank (mode-n unfoldings), each unfolding relaxed by a Schatten-p penalty.

#include <cstddef>
#include <span>
#include <vector>

#include "despeckle/prox.hpp"
#include "despeckle/tensor.hpp"

namespace despeckle {

struct AdmmConfig {
    double mu0 = 1.0;
    double mu_max = 1e3;
    double rho = 1.1;
    double eps_r = 1e-3;
    std::size_t itmax = 100;
    SpNorm norm = SpNorm::s1;

    static AdmmConfig tt_defaults(SpNorm norm, double mu0, double mu_max);
    static AdmmConfig ml_defaults(SpNorm norm, double mu0, double mu_max);
    // Throws InvalidArgument.
    void validate() const;
};

struct AdmmTrace {
    std::size_t iterations = 0;
    std::vector<double> rel_change;       // ||Z^{l+1} - Z^l|| / ||X||
    std::vector<double> mu;               // penalty used in iteration l
    std::vector<double> z_norm;           // ||Z^{l+1}||
    std::vector<double> primal_residual;  // max_k ||Z^{l+1} - M_k^{l+1}|| / ||X||
    bool converged = false;
    double mu_final = 0.0;
};

struct TtRank {
    std::vector<std::size_t> ranks;  // R_1..R_{N-1}
};

struct MlRank {
    std::vector<std::size_t> ranks;  // R_1..R_N
    bool zero = false;               // some unfolding was thresholded to zero
};

// Weights over the canonical unfoldings (N-1) and mode-n unfoldings (N).
std::vector<double> tt_weights(std::span<const std::size_t> dims);
std::vector<double> ml_weights(std::span<const std::size_t> dims);

struct TtDenoiseResult {
    DenseTensor denoised;
    AdmmTrace trace;
    TtRank ranks;  // ranks of the last M_k
};

struct MlDenoiseResult {
    DenseTensor denoised;
    AdmmTrace trace;
    MlRank ranks;
};

TtDenoiseResult denoise_tt(const DenseTensor& x, const AdmmConfig& cfg);
MlDenoiseResult denoise_ml(const DenseTensor& x, const AdmmConfig& cfg);

} // namespace despeckle
