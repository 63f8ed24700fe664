#pragma once

// Scalar proximity operators of tau*|u|^p for p in {0, 1/2, 2/3, 1} and
// singular-value thresholding built on them.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "despeckle/linalg.hpp"
#include "despeckle/tensor.hpp"

namespace despeckle {

enum class SpNorm { s0, s12, s23, s1 };

inline constexpr SpNorm kAllNorms[] = {SpNorm::s0, SpNorm::s12, SpNorm::s23, SpNorm::s1};

double p_value(SpNorm norm) noexcept;
// Accepts exactly 0, 0.5, 2/3 (to 1e-12) and 1.
SpNorm norm_from_p(double p);
const char* to_string(SpNorm norm) noexcept;            // "s0", "s12", "s23", "s1"
std::optional<SpNorm> parse_norm(std::string_view name) noexcept;

// tau * g(u): g = [u != 0] for p = 0, |u|^p otherwise.
double penalty(double u, double tau, SpNorm norm);

// Edge of the dead zone: prox_scalar(x) == 0 iff |x| <= prox_threshold(tau).
double prox_threshold(double tau, SpNorm norm);

// argmin_u 0.5*(u - x)^2 + penalty(u, tau). Ties at the threshold go to 0.
double prox_scalar(double x, double tau, SpNorm norm);

// Brute-force minimizer of the same objective (dense grid on
// [-|x|-1, |x|+1] followed by golden-section refinement); for testing.
double prox_oracle(double x, double tau, SpNorm norm);

struct SvtResult {
    DenseMatrix matrix;
    std::size_t rank = 0;
    std::vector<double> singular_values;  // post-threshold, descending
};

// U T(Sigma; tau) V^T from a full thin SVD.
SvtResult svt(const DenseMatrix& m, double tau, SpNorm norm);

struct SvtStats {
    std::size_t rank = 0;
    std::vector<double> singular_values;  // surviving, post-threshold, descending
};

// Same operator on an unfolding of a tensor-layout buffer, computed from the
// eigenpairs of the smaller Gram matrix above the dead zone. `out` receives
// the thresholded matrix in tensor layout.
SvtStats svt_unfolded(const linalg::Unfolding& u, const double* x, double tau, SpNorm norm, double* out);

} // namespace despeckle
