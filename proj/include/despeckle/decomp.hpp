#pragma once

// TT-SVD (error- or rank-driven) and Tucker fitting by higher-order orthogonal
// iteration, with reconstruction and storage accounting for both models.

#include <cstddef>
#include <functional>
#include <vector>

#include "despeckle/tensor.hpp"

namespace despeckle {

struct TTModel {
    Dims dims;
    // Core n has dims {R_{n-1}, I_n, R_n}, R_0 = R_N = 1.
    std::vector<DenseTensor> cores;

    std::vector<std::size_t> ranks() const;  // R_1..R_{N-1}
    std::size_t parameter_count() const;     // sum R_{n-1} I_n R_n
    void validate() const;                   // throws InvalidArgument
};

struct TuckerModel {
    DenseTensor core;                  // dims R_1..R_N
    std::vector<DenseMatrix> factors;  // I_n x R_n, orthonormal columns

    Dims dims() const;
    std::vector<std::size_t> ranks() const;
    std::size_t parameter_count() const;  // prod R_n + sum I_n R_n
    void validate() const;
};

// Relative error eps in (0, 1): every step discards at most
// eps ||x|| / sqrt(N-1) so that ||x - reconstruct|| <= eps ||x||.
TTModel tt_svd_eps(const DenseTensor& x, double eps);
// Truncate step k to min(ranks[k], numerical rank). ranks has N-1 entries,
// each in [1, min(I_1..I_k, I_{k+1}..I_N)].
TTModel tt_svd_ranks(const DenseTensor& x, const std::vector<std::size_t>& ranks);
DenseTensor tt_reconstruct(const TTModel& m);

struct TuckerSweep {
    std::size_t sweep = 0;  // 0 is the HOSVD initialization
    double fit = 0.0;       // 1 - ||x - reconstruct|| / ||x||
    const std::vector<DenseMatrix>* factors = nullptr;
};

struct TuckerOptions {
    double tol = 1e-6;  // on the change of fit between sweeps
    std::size_t max_sweeps = 50;
    std::function<void(const TuckerSweep&)> observer;
};

// ranks has N entries, each in [1, min(I_n, prod_{m != n} I_m)].
TuckerModel tucker_als(const DenseTensor& x, const std::vector<std::size_t>& ranks, const TuckerOptions& opt = {});
DenseTensor tucker_reconstruct(const TuckerModel& m);

} // namespace despeckle
