#pragma once

// One-dimensional vertical diffusions η on (0, ∞) with generator
//   B = a(y)² ∂²_y + b(y) ∂_y,
// killed at 0. Brownian normalisation throughout is E(β_t²) = 2t.

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gvmult/quadrature.hpp"

namespace gvmult {

/// a ≡ σ, b ≡ −2m.
struct BMDrift {
    double sigma = 1.0;
    double m = 0.0;
};

/// a ≡ 1, b = γ/y with γ = 1 − 2s.
struct Bessel {
    double s = 0.5;
    double gamma() const { return 1.0 - 2.0 * s; }
};

struct AdmissibilityReport {
    bool integral_at_infinity_diverges = false;
    bool integral_at_zero_converges = false;
    bool admissible = false;
    std::string diagnostics;
};

/// Piecewise-linear a and b on a strictly increasing grid, held constant
/// outside the grid. Tables for log h and the scale function at the nodes
/// are built once in the constructor and only read afterwards.
class TabulatedCoefficients {
public:
    TabulatedCoefficients(std::vector<double> y_grid, std::vector<double> a_vals, std::vector<double> b_vals,
                          double y_max);

    double a(double y) const;
    double b(double y) const;
    double y_max() const { return y_max_; }
    const std::vector<double>& y_grid() const { return y_; }
    const std::vector<double>& a_vals() const { return a_; }
    const std::vector<double>& b_vals() const { return b_; }

    /// ∫₁^y b/a² dw.
    double log_h(double y) const;
    /// s(z) = ∫₀^z exp(−log_h(w)) dw.
    double scale_function(double z) const;

    const AdmissibilityReport& admissibility() const { return report_; }
    /// Largest local growth exponent of G(∞,·) on a log grid over [1e-2, 1e6].
    double green_growth_exponent() const { return growth_exponent_; }

private:
    double ratio(double y) const;  // b/a²
    std::size_t segment(double y) const;
    void build_tables();
    void build_report();

    std::vector<double> y_, a_, b_;
    double y_max_;
    std::vector<double> log_h_nodes_;
    std::vector<double> scale_nodes_;
    AdmissibilityReport report_;
    double growth_exponent_ = 0.0;
};

enum class DiffusionKind { BMDrift, Bessel, Tabulated };

/// Immutable description of the vertical diffusion. Copies share the
/// (read-only) tabulated data.
class DiffusionSpec {
public:
    static DiffusionSpec bm_drift(double sigma, double m);
    static DiffusionSpec bessel(double s);
    static DiffusionSpec tabulated(std::vector<double> y_grid, std::vector<double> a_vals,
                                   std::vector<double> b_vals, double y_max);

    DiffusionKind kind() const;
    const BMDrift* as_bm_drift() const { return std::get_if<BMDrift>(&data_); }
    const Bessel* as_bessel() const { return std::get_if<Bessel>(&data_); }
    const TabulatedCoefficients* as_tabulated() const;

    double a(double y) const;
    double b(double y) const;

    std::string describe() const;

private:
    using Data = std::variant<BMDrift, Bessel, std::shared_ptr<const TabulatedCoefficients>>;
    explicit DiffusionSpec(Data d) : data_(std::move(d)) {}
    Data data_;
};

/// s′(z) = exp(−∫₁^z b/a²).
double scale_derivative(const DiffusionSpec& spec, double z);
/// m(z) = 1 / (s′(z) a(z)²).
double speed_density(const DiffusionSpec& spec, double z);
/// s(z) = ∫₀^z s′.
double scale_function(const DiffusionSpec& spec, double z);
/// h(y) = exp(∫₁^y b/a²) = 1/s′(y).
double h_function(const DiffusionSpec& spec, double y);

AdmissibilityReport check_conditions(const DiffusionSpec& spec);

/// Dirichlet-at-0 Green function G(y,z) = h(z)/a(z)² ∫₀^{y∧z} dw/h(w).
double green(const DiffusionSpec& spec, double y, double z);
/// G(∞,z) = s(z)·m(z).
double green_inf(const DiffusionSpec& spec, double z);

/// y ↦ K(y,λ) = E^y[e^{−λτ}] and its y-derivative for one fixed λ ≥ 0.
///
/// Closed forms for BMDrift and Bessel. Tabulated specs solve
/// B f = λ f, f(0) = 1, f(L) = 0 by centred differences on a grid clustered
/// near 0, Richardson-extrapolated over two resolutions. λ = 0 gives K ≡ 1
/// for every admissible spec (η hits 0 almost surely).
class KernelProfile {
public:
    KernelProfile(const DiffusionSpec& spec, double lambda);

    double value(double y) const;
    double dy(double y) const;
    double lambda() const { return lambda_; }
    /// Truncation length of the boundary-value problem (Tabulated only; 0 otherwise).
    double truncation() const { return bvp_length_; }

private:
    double bvp_value(double y) const;

    DiffusionSpec spec_;
    double lambda_;
    // BMDrift
    double rate_ = 0.0;
    // Bessel
    double bessel_norm_ = 0.0;
    // Tabulated
    double bvp_length_ = 0.0;
    double bvp_kappa_ = 0.0;
    std::vector<double> bvp_values_;
};

/// Step of the Richardson-extrapolated central difference used for Tabulated ∂_y K.
inline constexpr double kTabulatedDerivativeStep = 1e-3;

double kernel_K(const DiffusionSpec& spec, double y, double lambda);
double dK_dy(const DiffusionSpec& spec, double y, double lambda);

/// ∫₀^∞ G(y,z) g(z) dz, i.e. E^y[∫₀^τ g(η_s) ds]. `breakpoints` lists
/// discontinuities of g to help the quadrature.
double occupation_expectation(const DiffusionSpec& spec, const std::function<double(double)>& g, double y,
                              const std::vector<double>& breakpoints = {}, const QuadratureConfig& cfg = {});

/// Natural length scale of K(·,λ): the inverse exponential decay rate with the
/// coefficients at infinity.
double kernel_length_scale(const DiffusionSpec& spec, double lambda);

}  // namespace gvmult
