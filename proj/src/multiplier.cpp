#include "gvmult/multiplier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gvmult/errors.hpp"

namespace gvmult {

namespace {

void require_lambda(double lambda, const char* op) {
    if (!std::isfinite(lambda) || !(lambda > 0.0)) {
        std::ostringstream os;
        os << op << ": lambda must be positive and finite, got " << lambda;
        throw DomainError(os.str());
    }
}

// Gauss-Legendre nodes and weights on (−1, 1) by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

// Half-line quadrature of a y-profile built once per λ.
template <typename F>
double half_line(const F& f, const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg) {
    const double scale = kernel_length_scale(spec, lambda);
    return integrate_half_line(f, scale, cfg);
}

}  // namespace

// ---------------------------------------------------------------------------
// MeasureAlpha

MeasureAlpha MeasureAlpha::dirac(double location, cplx weight) {
    if (!(location >= 0.0)) throw DomainError("MeasureAlpha: atom location must be >= 0 or AT_INFINITY");
    MeasureAlpha a;
    a.atoms.push_back({location, weight});
    return a;
}

MeasureAlpha MeasureAlpha::from_density(const std::function<cplx(double)>& f, int n, double scale) {
    if (n < 1) throw DomainError("MeasureAlpha::from_density: need at least one node");
    if (!(scale > 0.0)) throw DomainError("MeasureAlpha::from_density: scale must be positive");
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    MeasureAlpha a;
    const double quarter_pi = 0.25 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        const double u = quarter_pi * (x[i] + 1.0);
        const double c = std::cos(u);
        const double y = scale * std::tan(u);
        a.density.push_back({y, w[i] * quarter_pi * scale / (c * c), f(y)});
    }
    return a;
}

bool MeasureAlpha::has_infinite_atom() const {
    return std::any_of(atoms.begin(), atoms.end(), [](const Atom& a) { return std::isinf(a.location); });
}

cplx MeasureAlpha::mass_at_zero() const {
    cplx m = 0.0;
    for (const auto& a : atoms)
        if (a.location == 0.0) m += a.weight;
    return m;
}

MeasureAlpha& MeasureAlpha::operator+=(const MeasureAlpha& other) {
    atoms.insert(atoms.end(), other.atoms.begin(), other.atoms.end());
    density.insert(density.end(), other.density.begin(), other.density.end());
    return *this;
}

MeasureAlpha& MeasureAlpha::operator*=(cplx c) {
    for (auto& a : atoms) a.weight *= c;
    for (auto& d : density) d.value *= c;
    return *this;
}

MeasureAlpha operator+(MeasureAlpha lhs, const MeasureAlpha& rhs) { return lhs += rhs; }
MeasureAlpha operator*(cplx c, MeasureAlpha alpha) { return alpha *= c; }

double total_variation(const MeasureAlpha& alpha) {
    // Atoms at the same point are merged first, so 2δ₀ − δ₀ has variation 1.
    std::vector<Atom> merged;
    for (const auto& a : alpha.atoms) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](const Atom& b) { return b.location == a.location; });
        if (it == merged.end()) merged.push_back(a);
        else it->weight += a.weight;
    }
    double tv = 0.0;
    for (const auto& a : merged) tv += std::abs(a.weight);
    for (const auto& d : alpha.density) tv += std::abs(d.value) * d.quad_weight;
    return tv;
}

// ---------------------------------------------------------------------------
// Extension symbols

double phi_extension(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg) {
    require_lambda(lambda, "phi_extension");
    const KernelProfile kp(spec, lambda);
    auto f = [&](double y) {
        if (y <= 0.0) return 0.0;
        const double d = kp.dy(y);
        if (d == 0.0) return 0.0;
        const double a = spec.a(y);
        return green_inf(spec, y) * d * d * a * a;
    };
    return half_line(f, spec, lambda, cfg);
}

double s_symbol(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg) {
    require_lambda(lambda, "s_symbol");
    const KernelProfile kp(spec, lambda);
    auto f = [&](double y) {
        if (y <= 0.0) return 0.0;
        const double k = kp.value(y);
        if (k == 0.0) return 0.0;
        return green_inf(spec, y) * k * k;
    };
    return half_line(f, spec, lambda, cfg);
}

double phi_alt(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg) {
    require_lambda(lambda, "phi_alt");
    return 0.5 - lambda * s_symbol(spec, lambda, cfg);
}

double t_symbol(const DiffusionSpec& spec, double lambda, const QuadratureConfig& cfg) {
    require_lambda(lambda, "t_symbol");
    const KernelProfile kp(spec, lambda);
    auto f = [&](double y) {
        if (y <= 0.0) return 0.0;
        const double k = kp.value(y);
        if (k == 0.0) return 0.0;
        return spec.a(y) * green_inf(spec, y) * kp.dy(y) * k;
    };
    return half_line(f, spec, lambda, cfg);
}

// ---------------------------------------------------------------------------
// Stieltjes builders

cplx phi_stieltjes_w(const MeasureAlpha& alpha, double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("phi_stieltjes_w: x must be finite and >= 0");
    if (alpha.has_infinite_atom())
        throw DomainError("phi_stieltjes_w: the measure lives on [0, inf); an atom at infinity is rejected");
    auto integrand = [x](double m) {
        if (m == 0.0) return 1.0;
        return 1.0 - m / std::sqrt(m * m + x);
    };
    cplx v = 0.0;
    for (const auto& a : alpha.atoms) v += a.weight * integrand(a.location);
    for (const auto& d : alpha.density) v += d.value * (d.quad_weight * integrand(d.y));
    return v;
}

cplx phi_stieltjes_r1(const MeasureAlpha& alpha, double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("phi_stieltjes_r1: x must be finite and >= 0");
    if (alpha.has_infinite_atom()) throw DomainError("phi_stieltjes_r1: an atom at infinity is not allowed");
    if (x == 0.0 && alpha.mass_at_zero() != cplx(0.0))
        throw DomainError("phi_stieltjes_r1: x = 0 with mass at m = 0 is singular");
    cplx v = 0.0;
    for (const auto& a : alpha.atoms) v += a.weight / std::sqrt(x + a.location);
    for (const auto& d : alpha.density) v += d.value * (d.quad_weight / std::sqrt(x + d.y));
    return v;
}

cplx phi_stieltjes_r2(const MeasureAlpha& alpha, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("phi_stieltjes_r2: x must be positive and finite");
    // 1/(r(r−m)) = (r+m)/(x r) with r = √(x+m²).
    auto integrand = [x](double m) {
        if (std::isinf(m)) return 2.0 / x;
        const double r = std::sqrt(x + m * m);
        return (r + m) / (x * r);
    };
    cplx v = 0.0;
    for (const auto& a : alpha.atoms) v += a.weight * integrand(a.location);
    for (const auto& d : alpha.density) v += d.value * (d.quad_weight * integrand(d.y));
    return v;
}

// ---------------------------------------------------------------------------
// Constants

LpConstants constants(double p) {
    if (!std::isfinite(p) || !(p > 1.0)) {
        std::ostringstream os;
        os << "constants: p must be > 1, got " << p;
        throw DomainError(os.str());
    }
    LpConstants c{};
    c.p = p;
    c.p_star = std::max(p, p / (p - 1.0));
    c.burkholder = c.p_star - 1.0;
    c.choi_cot = 1.0 / std::tan(std::numbers::pi / (2.0 * c.p_star));
    const double e2 = std::exp(-2.0);
    const double l = std::log((1.0 + e2) / 2.0);
    const double q = e2 / (1.0 + e2);
    const double alpha2 = l * l + 0.5 * l - 2.0 * q * q;
    c.c_p_asymptotic = p / 2.0 + 0.5 * l + alpha2 / p;
    c.choi_lower = std::max(1.0, c.p_star / 2.0 - 1.0);
    c.choi_upper = c.p_star / 2.0;
    return c;
}

// ---------------------------------------------------------------------------
// MultiplierSymbol

const char* to_string(SymbolKind kind) {
    switch (kind) {
        case SymbolKind::ExtensionQuadrature: return "ExtensionQuadrature";
        case SymbolKind::StieltjesW: return "StieltjesW";
        case SymbolKind::StieltjesRiesz1: return "StieltjesRiesz1";
        case SymbolKind::StieltjesRiesz2: return "StieltjesRiesz2";
        case SymbolKind::ClosedForm: return "ClosedForm";
    }
    return "unknown";
}

std::vector<double> standard_lambda_grid() {
    std::vector<double> g;
    for (int k = -12; k <= 16; ++k) g.push_back(std::pow(10.0, 0.25 * k));
    return g;
}

namespace {

double empirical_sup(const MultiplierSymbol::Evaluator& f) {
    double s = 0.0;
    for (double l : standard_lambda_grid()) s = std::max(s, std::abs(f(l)));
    return s;
}

}  // namespace

MultiplierSymbol::MultiplierSymbol(Evaluator f, SymbolKind kind, double sup_bound, std::string description)
    : f_(std::move(f)), kind_(kind), sup_bound_(sup_bound), description_(std::move(description)) {}

MultiplierSymbol MultiplierSymbol::extension(const DiffusionSpec& spec) {
    Evaluator f = [spec](double l) { return cplx(phi_extension(spec, l)); };
    const double bound = empirical_sup(f);
    return {f, SymbolKind::ExtensionQuadrature, bound, "W[" + spec.describe() + "]"};
}

MultiplierSymbol MultiplierSymbol::stieltjes_w(const MeasureAlpha& alpha) {
    if (alpha.has_infinite_atom()) throw DomainError("stieltjes_w: an atom at infinity is rejected");
    Evaluator f = [alpha](double l) { return phi_stieltjes_w(alpha, l); };
    return {f, SymbolKind::StieltjesW, total_variation(alpha), "StieltjesW"};
}

MultiplierSymbol MultiplierSymbol::stieltjes_r1(const MeasureAlpha& alpha) {
    Evaluator f = [alpha](double l) { return phi_stieltjes_r1(alpha, l); };
    return {f, SymbolKind::StieltjesRiesz1, empirical_sup(f), "StieltjesRiesz1"};
}

MultiplierSymbol MultiplierSymbol::stieltjes_r2(const MeasureAlpha& alpha) {
    Evaluator f = [alpha](double l) { return phi_stieltjes_r2(alpha, l); };
    return {f, SymbolKind::StieltjesRiesz2, empirical_sup(f), "StieltjesRiesz2"};
}

MultiplierSymbol MultiplierSymbol::closed_form(const std::string& tag, Evaluator f, double sup_bound) {
    const double bound = sup_bound >= 0.0 ? sup_bound : empirical_sup(f);
    return {std::move(f), SymbolKind::ClosedForm, bound, tag};
}

cplx MultiplierSymbol::operator()(double lambda) const {
    if (lambda == 0.0 && !defined_at_zero()) {
        if (kind_ != SymbolKind::ClosedForm)
            throw DomainError(description_ + ": symbol is only defined for lambda > 0");
    }
    if (!(lambda >= 0.0)) throw DomainError(description_ + ": lambda must be >= 0");
    return f_(lambda);
}

}  // namespace gvmult
