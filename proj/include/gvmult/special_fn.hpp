#pragma once

#include <utility>

#include "gvmult/quadrature.hpp"

namespace gvmult {

/// Γ(x) for x > 0.
double gamma(double x);

/// MacDonald function K_s(x), x > 0, |s| < 5, computed from its integral
/// representation K_s(x) = ½(x/2)^s ∫₀^∞ exp(−t − x²/4t) t^{−1−s} dt.
///
/// The substitution t = (x/2)·e^v maps the split point t = x/2 to v = 0 and
/// gives the even form ∫₀^∞ exp(−x cosh v) cosh(sv) dv, which is what is
/// integrated. The form is manifestly even in s, so K_{−s} = K_s bit for bit.
double bessel_k(double s, double x, const QuadratureConfig& cfg = {});

/// e^x·K_s(x). Does not underflow for large x.
double bessel_k_scaled(double s, double x, const QuadratureConfig& cfg = {});

struct Mcd2Pair {
    double lhs;  ///< quadrature of ∫₀^∞ y^{α−1} K_ν(y)² dy
    double rhs;  ///< closed Gamma-function value
};

/// Both sides of ∫₀^∞ y^{α−1}K_ν(y)² dy = √π Γ(α/2)Γ(α/2−ν)Γ(α/2+ν) / (4Γ((1+α)/2)).
/// Requires α > 2ν > 0; the boundary α = 2ν is rejected.
Mcd2Pair mcd2_pair(double alpha, double nu, const QuadratureConfig& cfg = {});

}  // namespace gvmult
