#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gvmult/quadrature.hpp"
#include "gvmult/vertical_diffusion.hpp"

namespace gvmult {

using cplx = std::complex<double>;

/// Location of the Dirac mass at +∞ allowed in the second-order representation.
inline constexpr double AT_INFINITY = std::numeric_limits<double>::infinity();

struct Atom {
    double location;  ///< ≥ 0, or AT_INFINITY
    cplx weight;
};

/// One sample of the density part: contributes value·quad_weight at y.
struct DensityNode {
    double y;
    double quad_weight;
    cplx value;
};

/// Finite complex measure α on [0, ∞]: atoms plus a user-sampled density.
struct MeasureAlpha {
    std::vector<Atom> atoms;
    std::vector<DensityNode> density;

    static MeasureAlpha dirac(double location, cplx weight = 1.0);
    /// Samples f on (0, ∞) with n Gauss-Legendre nodes in u after y = scale·tan(u).
    static MeasureAlpha from_density(const std::function<cplx(double)>& f, int n, double scale = 1.0);

    bool has_infinite_atom() const;
    /// Total mass at the point 0.
    cplx mass_at_zero() const;

    MeasureAlpha& operator+=(const MeasureAlpha& other);
    MeasureAlpha& operator*=(cplx c);
};

MeasureAlpha operator+(MeasureAlpha lhs, const MeasureAlpha& rhs);
MeasureAlpha operator*(cplx c, MeasureAlpha alpha);

/// Sum of atom |weights| plus the quadrature of |density|.
double total_variation(const MeasureAlpha& alpha);

/// Φ(λ) = ∫₀^∞ G(∞,y) (∂_yK(y,λ))² a(y)² dy.
double phi_extension(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg = {});
/// Φ(λ) = ½ − λ ∫₀^∞ G(∞,y) K(y,λ)² dy.
double phi_alt(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg = {});
/// ∫₀^∞ a(y) G(∞,y) ∂_yK(y,λ) K(y,λ) dy (raw value; operator signs live in torus_spectral).
double t_symbol(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg = {});
/// ∫₀^∞ G(∞,y) K(y,λ)² dy.
double s_symbol(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg = {});

/// ∫ (1 − m/√(m²+x)) dα(m), x ≥ 0. The integrand at m = 0 is taken as 1 for every x ≥ 0.
cplx phi_stieltjes_w(const MeasureAlpha& alpha, double x);
/// ∫ dα(m)/√(x+m).
cplx phi_stieltjes_r1(const MeasureAlpha& alpha, double x);
/// ∫ dα(m)/(√(x+m²)(√(x+m²)−m)); an atom at AT_INFINITY contributes weight·2/x.
cplx phi_stieltjes_r2(const MeasureAlpha& alpha, double x);

struct LpConstants {
    double p;
    double p_star;
    double burkholder;      ///< p* − 1
    double choi_cot;        ///< cot(π/(2p*))
    double c_p_asymptotic;  ///< p/2 + ½log((1+e⁻²)/2) + α₂/p
    double choi_lower;      ///< max(1, p*/2 − 1)
    double choi_upper;      ///< p*/2
};

LpConstants constants(double p);

enum class SymbolKind { ExtensionQuadrature, StieltjesW, StieltjesRiesz1, StieltjesRiesz2, ClosedForm };

const char* to_string(SymbolKind kind);

/// Scalar symbol λ ↦ Φ(λ) with its provenance and a recorded bound on |Φ|.
class MultiplierSymbol {
public:
    using Evaluator = std::function<cplx(double)>;

    MultiplierSymbol(Evaluator f, SymbolKind kind, double sup_bound, std::string description);

    static MultiplierSymbol extension(const DiffusionSpec& spec);
    static MultiplierSymbol stieltjes_w(const MeasureAlpha& alpha);
    static MultiplierSymbol stieltjes_r1(const MeasureAlpha& alpha);
    static MultiplierSymbol stieltjes_r2(const MeasureAlpha& alpha);
    /// `sup_bound` < 0 requests an empirical bound on the standard λ grid.
    static MultiplierSymbol closed_form(const std::string& tag, Evaluator f, double sup_bound = -1.0);

    cplx operator()(double lambda) const;
    SymbolKind kind() const { return kind_; }
    double sup_bound() const { return sup_bound_; }
    const std::string& description() const { return description_; }
    /// Whether Φ(0) is defined (only StieltjesW and closed forms that accept it).
    bool defined_at_zero() const { return kind_ == SymbolKind::StieltjesW; }

private:
    Evaluator f_;
    SymbolKind kind_;
    double sup_bound_;
    std::string description_;
};

/// λ grid used for empirical sup bounds: 10^{k/4}, k = −12..16.
std::vector<double> standard_lambda_grid();

}  // namespace gvmult
