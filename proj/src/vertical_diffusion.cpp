#include "gvmult/vertical_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gvmult/errors.hpp"
#include "gvmult/special_fn.hpp"

namespace gvmult {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* what) {
    if (!std::isfinite(v) || !(v > 0.0)) {
        std::ostringstream os;
        os << what << " must be positive and finite, got " << v;
        throw DomainError(os.str());
    }
}

// (e^{c·length} − 1)/c, without cancellation for small c.
double exp_segment_integral(double c, double length) {
    if (c == 0.0) return length;
    return std::expm1(c * length) / c;
}

void require_admissible(const DiffusionSpec& spec, const char* op) {
    const auto report = check_conditions(spec);
    if (!report.admissible) {
        std::ostringstream os;
        os << op << ": spec " << spec.describe() << " is not admissible (" << report.diagnostics << ")";
        throw PreconditionError(os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// TabulatedCoefficients

TabulatedCoefficients::TabulatedCoefficients(std::vector<double> y_grid, std::vector<double> a_vals,
                                             std::vector<double> b_vals, double y_max)
    : y_(std::move(y_grid)), a_(std::move(a_vals)), b_(std::move(b_vals)), y_max_(y_max) {
    if (y_.size() < 8) throw DomainError("tabulated spec needs at least 8 nodes");
    if (a_.size() != y_.size() || b_.size() != y_.size())
        throw DomainError("tabulated spec: y, a and b must have equal length");
    for (std::size_t i = 0; i < y_.size(); ++i) {
        require_positive(y_[i], "tabulated y node");
        require_positive(a_[i], "tabulated a value");
        if (!std::isfinite(b_[i])) throw DomainError("tabulated b value must be finite");
        if (i > 0 && !(y_[i] > y_[i - 1])) throw DomainError("tabulated y grid must be strictly increasing");
    }
    if (!std::isfinite(y_max_) || y_max_ < y_.back()) {
        std::ostringstream os;
        os << "tabulated y_max " << y_max_ << " must be finite and at least the last node " << y_.back();
        throw DomainError(os.str());
    }
    build_tables();
    build_report();
}

std::size_t TabulatedCoefficients::segment(double y) const {
    const auto it = std::upper_bound(y_.begin(), y_.end(), y);
    const auto idx = static_cast<std::ptrdiff_t>(it - y_.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(y_.size()) - 2));
}

double TabulatedCoefficients::a(double y) const {
    if (y <= y_.front()) return a_.front();
    if (y >= y_.back()) return a_.back();
    const std::size_t i = segment(y);
    const double t = (y - y_[i]) / (y_[i + 1] - y_[i]);
    return a_[i] + t * (a_[i + 1] - a_[i]);
}

double TabulatedCoefficients::b(double y) const {
    if (y <= y_.front()) return b_.front();
    if (y >= y_.back()) return b_.back();
    const std::size_t i = segment(y);
    const double t = (y - y_[i]) / (y_[i + 1] - y_[i]);
    return b_[i] + t * (b_[i + 1] - b_[i]);
}

double TabulatedCoefficients::ratio(double y) const {
    const double av = a(y);
    return b(y) / (av * av);
}

void TabulatedCoefficients::build_tables() {
    const std::size_t n = y_.size();
    QuadratureConfig cfg;
    cfg.rel_tol = 1e-13;

    // Cumulative ∫_{y_0}^{y_i} b/a², then shifted so that log h(1) = 0.
    std::vector<double> raw(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        raw[i] = raw[i - 1] + integrate([this](double w) { return ratio(w); }, y_[i - 1], y_[i], cfg);
    log_h_nodes_ = raw;
    double shift;
    if (1.0 <= y_.front()) {
        shift = raw.front() + (1.0 - y_.front()) * ratio(y_.front());
    } else if (1.0 >= y_.back()) {
        shift = raw.back() + (1.0 - y_.back()) * ratio(y_.back());
    } else {
        const std::size_t i = segment(1.0);
        shift = raw[i] + integrate([this](double w) { return ratio(w); }, y_[i], 1.0, cfg);
    }
    for (double& v : log_h_nodes_) v -= shift;

    // s(y_i) = ∫₀^{y_i} e^{-log h}.
    scale_nodes_.assign(n, 0.0);
    const double c0 = ratio(y_.front());
    // On (0, y_0] log h(w) = log h(y_0) + c0 (w - y_0).
    scale_nodes_[0] = std::exp(-log_h_nodes_[0]) * exp_segment_integral(c0, y_.front());
    for (std::size_t i = 1; i < n; ++i) {
        scale_nodes_[i] = scale_nodes_[i - 1] +
                          integrate([this](double w) { return std::exp(-log_h(w)); }, y_[i - 1], y_[i], cfg);
    }
}

double TabulatedCoefficients::log_h(double y) const {
    if (y <= y_.front()) return log_h_nodes_.front() + (y - y_.front()) * ratio(y_.front());
    if (y >= y_.back()) return log_h_nodes_.back() + (y - y_.back()) * ratio(y_.back());
    const std::size_t i = segment(y);
    if (y == y_[i]) return log_h_nodes_[i];
    QuadratureConfig cfg;
    cfg.rel_tol = 1e-13;
    return log_h_nodes_[i] + integrate([this](double w) { return ratio(w); }, y_[i], y, cfg);
}

double TabulatedCoefficients::scale_function(double z) const {
    if (z <= 0.0) return 0.0;
    if (z <= y_.front()) {
        // ∫₀^z e^{-log h(y_0) - c0 (w - y_0)} dw
        const double c0 = ratio(y_.front());
        return std::exp(-log_h_nodes_.front() - c0 * (z - y_.front())) * exp_segment_integral(c0, z);
    }
    if (z >= y_.back()) {
        const double c = ratio(y_.back());
        return scale_nodes_.back() + std::exp(-log_h_nodes_.back()) * exp_segment_integral(-c, z - y_.back());
    }
    const std::size_t i = segment(z);
    if (z == y_[i]) return scale_nodes_[i];
    QuadratureConfig cfg;
    cfg.rel_tol = 1e-12;
    return scale_nodes_[i] + integrate([this](double w) { return std::exp(-log_h(w)); }, y_[i], z, cfg);
}

void TabulatedCoefficients::build_report() {
    std::ostringstream diag;
    const double s1 = scale_function(1.0);
    report_.integral_at_zero_converges = std::isfinite(s1);
    diag << "int_0^1 s' = " << s1 << "; ";

    // Heuristic: the last doubling of R must still add a sizeable share.
    const double r0 = std::max(y_max_, 2.0);
    double prev = scale_function(r0) - s1;
    double last = prev;
    bool finite = std::isfinite(prev);
    for (int k = 1; k <= 10 && finite; ++k) {
        prev = last;
        last = scale_function(r0 * std::ldexp(1.0, k)) - s1;
        finite = std::isfinite(last);
    }
    if (!finite) {
        report_.integral_at_infinity_diverges = true;
        diag << "int_1^R s' overflowed (divergent); ";
    } else {
        const double share = (last - prev) / last;
        report_.integral_at_infinity_diverges = share >= 0.1;
        diag << "int_1^R s' at R=" << r0 * 1024.0 << " is " << last << ", last doubling adds " << share * 100.0
             << "% (heuristic divergence test); ";
    }
    report_.admissible = report_.integral_at_infinity_diverges && report_.integral_at_zero_converges;

    // Local growth exponent of G(∞,z) on a log grid.
    growth_exponent_ = -kInf;
    double prev_log = 0.0;
    for (int j = 0; j <= 16; ++j) {
        const double lz = std::log(10.0) * (-2.0 + 0.5 * j);
        const double z = std::exp(lz);
        double g;
        if (z <= y_.back()) {
            g = scale_function(z) * std::exp(log_h(z));
        } else {
            const double c = ratio(y_.back());
            g = scale_nodes_.back() * std::exp(log_h(z)) + exp_segment_integral(c, z - y_.back());
        }
        const double av = a(z);
        const double lg = std::log(g / (av * av));
        if (!std::isfinite(lg)) {
            growth_exponent_ = kInf;
            break;
        }
        if (j > 0) growth_exponent_ = std::max(growth_exponent_, (lg - prev_log) / (0.5 * std::log(10.0)));
        prev_log = lg;
    }
    diag << "G(inf,.) growth exponent " << growth_exponent_;
    report_.diagnostics = diag.str();
}

// ---------------------------------------------------------------------------
// DiffusionSpec

DiffusionSpec DiffusionSpec::bm_drift(double sigma, double m) {
    require_positive(sigma, "BMDrift sigma");
    if (!std::isfinite(m) || m < 0.0) throw DomainError("BMDrift m must be finite and >= 0");
    return DiffusionSpec(BMDrift{sigma, m});
}

DiffusionSpec DiffusionSpec::bessel(double s) {
    if (!(s > 0.0 && s < 1.0)) {
        std::ostringstream os;
        os << "Bessel s must lie in (0,1), got " << s;
        throw DomainError(os.str());
    }
    return DiffusionSpec(Bessel{s});
}

DiffusionSpec DiffusionSpec::tabulated(std::vector<double> y_grid, std::vector<double> a_vals,
                                       std::vector<double> b_vals, double y_max) {
    return DiffusionSpec(std::make_shared<const TabulatedCoefficients>(std::move(y_grid), std::move(a_vals),
                                                                       std::move(b_vals), y_max));
}

DiffusionKind DiffusionSpec::kind() const {
    switch (data_.index()) {
        case 0: return DiffusionKind::BMDrift;
        case 1: return DiffusionKind::Bessel;
        default: return DiffusionKind::Tabulated;
    }
}

const TabulatedCoefficients* DiffusionSpec::as_tabulated() const {
    const auto* p = std::get_if<std::shared_ptr<const TabulatedCoefficients>>(&data_);
    return p ? p->get() : nullptr;
}

double DiffusionSpec::a(double y) const {
    if (const auto* bm = as_bm_drift()) return bm->sigma;
    if (as_bessel()) return 1.0;
    return as_tabulated()->a(y);
}

double DiffusionSpec::b(double y) const {
    if (const auto* bm = as_bm_drift()) return -2.0 * bm->m;
    if (const auto* be = as_bessel()) return be->gamma() / y;
    return as_tabulated()->b(y);
}

std::string DiffusionSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    if (const auto* bm = as_bm_drift()) {
        os << "BMDrift{sigma=" << bm->sigma << ", m=" << bm->m << "}";
    } else if (const auto* be = as_bessel()) {
        os << "Bessel{s=" << be->s << "}";
    } else {
        const auto* t = as_tabulated();
        os << "Tabulated{n=" << t->y_grid().size() << ", y_max=" << t->y_max() << "}";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// scale and speed

namespace {

double log_h_of(const DiffusionSpec& spec, double y) {
    if (const auto* bm = spec.as_bm_drift()) return -2.0 * bm->m * (y - 1.0) / (bm->sigma * bm->sigma);
    if (const auto* be = spec.as_bessel()) return be->gamma() * std::log(y);
    return spec.as_tabulated()->log_h(y);
}

// s(z)·h(z), evaluated without forming either factor when they would overflow.
double scale_times_h(const DiffusionSpec& spec, double z) {
    if (const auto* bm = spec.as_bm_drift()) {
        const double s2 = bm->sigma * bm->sigma;
        if (bm->m == 0.0) return z;
        return -std::expm1(-2.0 * bm->m * z / s2) * s2 / (2.0 * bm->m);
    }
    if (const auto* be = spec.as_bessel()) return z / (2.0 * be->s);
    const auto* t = spec.as_tabulated();
    const double last = t->y_grid().back();
    if (z <= last) return t->scale_function(z) * std::exp(t->log_h(z));
    const double av = t->a_vals().back();
    const double c = t->b_vals().back() / (av * av);
    const double d = z - last;
    return t->scale_function(last) * std::exp(t->log_h(z)) + exp_segment_integral(c, d);
}

}  // namespace

double scale_derivative(const DiffusionSpec& spec, double z) {
    require_positive(z, "scale_derivative: z");
    return std::exp(-log_h_of(spec, z));
}

double h_function(const DiffusionSpec& spec, double y) {
    require_positive(y, "h_function: y");
    return std::exp(log_h_of(spec, y));
}

double speed_density(const DiffusionSpec& spec, double z) {
    require_positive(z, "speed_density: z");
    const double av = spec.a(z);
    return std::exp(log_h_of(spec, z)) / (av * av);
}

double scale_function(const DiffusionSpec& spec, double z) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw DomainError("scale_function: z must be finite and >= 0");
    if (const auto* bm = spec.as_bm_drift()) {
        if (bm->m == 0.0) return z;
        const double c = 2.0 * bm->m / (bm->sigma * bm->sigma);
        return std::exp(-c) * std::expm1(c * z) / c;
    }
    if (const auto* be = spec.as_bessel()) return std::pow(z, 2.0 * be->s) / (2.0 * be->s);
    return spec.as_tabulated()->scale_function(z);
}

AdmissibilityReport check_conditions(const DiffusionSpec& spec) {
    AdmissibilityReport r;
    if (const auto* bm = spec.as_bm_drift()) {
        r.integral_at_infinity_diverges = true;
        r.integral_at_zero_converges = true;
        std::ostringstream os;
        os << "closed form: s'(z) = exp(" << 2.0 * bm->m / (bm->sigma * bm->sigma)
           << "(z-1)) is non-decreasing, so int_1^inf s' diverges; int_0^1 s' is finite";
        r.diagnostics = os.str();
    } else if (const auto* be = spec.as_bessel()) {
        const double g = be->gamma();
        r.integral_at_infinity_diverges = g <= 1.0;
        r.integral_at_zero_converges = g < 1.0;
        std::ostringstream os;
        os << "closed form: s'(z) = z^" << -g << " with gamma in (-1,1)";
        r.diagnostics = os.str();
    } else {
        return spec.as_tabulated()->admissibility();
    }
    r.admissible = r.integral_at_infinity_diverges && r.integral_at_zero_converges;
    return r;
}

// ---------------------------------------------------------------------------
// Green functions

double green_inf(const DiffusionSpec& spec, double z) {
    require_positive(z, "green_inf: z");
    require_admissible(spec, "green_inf");
    if (const auto* t = spec.as_tabulated()) {
        if (!(t->green_growth_exponent() <= 8.0)) {
            std::ostringstream os;
            os << "green_inf: G(inf,.) grows faster than polynomially (local exponent "
               << t->green_growth_exponent() << " > 8)";
            throw ValidationError(os.str());
        }
    }
    const double av = spec.a(z);
    const double v = scale_times_h(spec, z) / (av * av);
    if (!std::isfinite(v)) throw NumericError("green_inf: non-finite value");
    return v;
}

double green(const DiffusionSpec& spec, double y, double z) {
    require_positive(y, "green: y");
    require_positive(z, "green: z");
    require_admissible(spec, "green");
    if (y >= z) return green_inf(spec, z);
    if (const auto* bm = spec.as_bm_drift()) {
        const double s2 = bm->sigma * bm->sigma;
        if (bm->m == 0.0) return y / s2;
        const double c = 2.0 * bm->m / s2;
        return (std::exp(-c * (z - y)) - std::exp(-c * z)) / (2.0 * bm->m);
    }
    if (const auto* be = spec.as_bessel()) {
        const double g = be->gamma();
        return std::pow(z, g) * std::pow(y, 1.0 - g) / (1.0 - g);
    }
    const double av = spec.a(z);
    const double v = scale_function(spec, y) * std::exp(log_h_of(spec, z)) / (av * av);
    if (!std::isfinite(v)) throw NumericError("green: non-finite value (inner integral diverges)");
    return v;
}

// ---------------------------------------------------------------------------
// Hitting-time kernel

namespace {

double tail_rate(const DiffusionSpec& spec, double lambda) {
    if (const auto* bm = spec.as_bm_drift()) {
        const double s2 = bm->sigma * bm->sigma;
        // (√(λσ²+m²) − m)/σ², written without cancellation.
        return lambda / (std::sqrt(lambda * s2 + bm->m * bm->m) + bm->m);
    }
    if (spec.as_bessel()) return std::sqrt(lambda);
    const auto* t = spec.as_tabulated();
    const double a2 = t->a_vals().back() * t->a_vals().back();
    const double b = t->b_vals().back();
    // positive root of a² r² − b r − λ = 0 for the decaying mode e^{−ry}
    if (b > 0.0) return 2.0 * lambda / (b + std::sqrt(b * b + 4.0 * a2 * lambda));
    return (-b + std::sqrt(b * b + 4.0 * a2 * lambda)) / (2.0 * a2);
}

struct BvpGrid {
    double length;
    double kappa;
    int n;
    double y(int i) const {
        const double xi = static_cast<double>(i) / n;
        return length * std::expm1(kappa * xi) / std::expm1(kappa);
    }
};

// Centred second-order differences for a² f'' + b f' − λ f = 0, f(0)=1, f(L)=0.
std::vector<double> solve_bvp(const TabulatedCoefficients& t, double lambda, const BvpGrid& grid) {
    const int n = grid.n;
    std::vector<double> y(n + 1);
    for (int i = 0; i <= n; ++i) y[i] = grid.y(i);
    y[n] = grid.length;
    std::vector<double> lower(n + 1), diag(n + 1), upper(n + 1), rhs(n + 1, 0.0);
    diag[0] = 1.0;
    rhs[0] = 1.0;
    diag[n] = 1.0;
    for (int i = 1; i < n; ++i) {
        const double hm = y[i] - y[i - 1];
        const double hp = y[i + 1] - y[i];
        const double av = t.a(y[i]);
        const double a2 = av * av;
        const double b = t.b(y[i]);
        lower[i] = a2 * 2.0 / (hm * (hm + hp)) - b * hp / (hm * (hm + hp));
        diag[i] = -a2 * 2.0 / (hm * hp) + b * (hp - hm) / (hm * hp) - lambda;
        upper[i] = a2 * 2.0 / (hp * (hm + hp)) + b * hm / (hp * (hm + hp));
    }
    // Thomas elimination
    for (int i = 1; i <= n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> f(n + 1);
    f[n] = rhs[n] / diag[n];
    for (int i = n - 1; i >= 0; --i) f[i] = (rhs[i] - upper[i] * f[i + 1]) / diag[i];
    return f;
}

constexpr int kBvpNodes = 4000;

}  // namespace

double kernel_length_scale(const DiffusionSpec& spec, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("kernel_length_scale: lambda must be >= 0");
    if (lambda == 0.0) return kInf;
    return 1.0 / tail_rate(spec, lambda);
}

KernelProfile::KernelProfile(const DiffusionSpec& spec, double lambda) : spec_(spec), lambda_(lambda) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        std::ostringstream os;
        os << "kernel: lambda must be finite and >= 0, got " << lambda;
        throw DomainError(os.str());
    }
    require_admissible(spec, "kernel");
    if (lambda == 0.0) return;
    if (spec.as_bm_drift()) {
        rate_ = tail_rate(spec, lambda);
    } else if (const auto* be = spec.as_bessel()) {
        bessel_norm_ = std::pow(2.0, 1.0 - be->s) / gamma(be->s);
    } else {
        const auto* t = spec.as_tabulated();
        const double r = tail_rate(spec, lambda);
        bvp_length_ = std::max(t->y_max(), 40.0 / r);
        // Grade the grid so that the first step resolves both the coefficient
        // table and the decay length.
        const double h0 = 1e-3 * std::min({t->y_grid().front() * 10.0, t->y_max(), 1.0 / r});
        const double target = h0 * kBvpNodes / bvp_length_;
        double kappa = 1e-6;
        if (target < 1.0) {
            double lo = 1e-6, hi = 60.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid / std::expm1(mid) > target) lo = mid;
                else hi = mid;
            }
            kappa = hi;
        }
        bvp_kappa_ = kappa;
        const auto coarse = solve_bvp(*t, lambda, {bvp_length_, kappa, kBvpNodes});
        const auto fine = solve_bvp(*t, lambda, {bvp_length_, kappa, 2 * kBvpNodes});
        bvp_values_.resize(kBvpNodes + 1);
        double worst = 0.0;
        for (int i = 0; i <= kBvpNodes; ++i) {
            const double c = coarse[i];
            const double f = fine[2 * i];
            worst = std::max(worst, std::abs(f - c));
            bvp_values_[i] = (4.0 * f - c) / 3.0;
            if (!std::isfinite(bvp_values_[i])) {
                std::ostringstream os;
                os << "kernel BVP failed for " << spec.describe() << " at lambda=" << lambda
                   << ": non-finite value at node " << i << ", coarse/fine difference so far " << worst;
                throw NumericError(os.str());
            }
        }
        if (worst > 1e-2) {
            std::ostringstream os;
            os << "kernel BVP for " << spec.describe() << " at lambda=" << lambda
               << " is under-resolved: coarse/fine difference " << worst;
            throw NumericError(os.str());
        }
        // K takes values in [0,1] and is non-increasing; only rounding noise is
        // removed here.
        double running = 1.0;
        for (double& v : bvp_values_) {
            v = std::clamp(v, 0.0, running);
            running = v;
        }
        bvp_values_.front() = 1.0;
    }
}

double KernelProfile::bvp_value(double y) const {
    if (y >= bvp_length_) return 0.0;
    const double xi = std::log1p(y * std::expm1(bvp_kappa_) / bvp_length_) / bvp_kappa_;
    const double p = xi * kBvpNodes;
    int i0 = static_cast<int>(std::floor(p)) - 1;
    i0 = std::clamp(i0, 0, kBvpNodes - 3);
    double result = 0.0;
    for (int j = 0; j < 4; ++j) {
        double w = 1.0;
        for (int k = 0; k < 4; ++k)
            if (k != j) w *= (p - (i0 + k)) / static_cast<double>(j - k);
        result += w * bvp_values_[i0 + j];
    }
    return std::clamp(result, 0.0, 1.0);
}

double KernelProfile::value(double y) const {
    if (!(y >= 0.0)) throw DomainError("kernel_K: y must be >= 0");
    if (lambda_ == 0.0 || y == 0.0) return 1.0;
    if (std::isinf(y)) return 0.0;
    if (spec_.as_bm_drift()) return std::exp(-rate_ * y);
    if (const auto* be = spec_.as_bessel()) {
        const double z = y * std::sqrt(lambda_);
        const double log_term = be->s * std::log(z) - z;
        if (log_term < -745.0) return 0.0;
        return bessel_norm_ * std::exp(log_term) * bessel_k_scaled(be->s, z);
    }
    return bvp_value(y);
}

double KernelProfile::dy(double y) const {
    if (!(y > 0.0)) throw DomainError("dK_dy: y must be > 0");
    if (lambda_ == 0.0 || std::isinf(y)) return 0.0;
    if (spec_.as_bm_drift()) return -rate_ * std::exp(-rate_ * y);
    if (const auto* be = spec_.as_bessel()) {
        const double root = std::sqrt(lambda_);
        const double z = y * root;
        const double log_term = be->s * std::log(z) - z;
        if (log_term < -745.0) return 0.0;
        return -bessel_norm_ * root * std::exp(log_term) * bessel_k_scaled(1.0 - be->s, z);
    }
    const double h = std::min(kTabulatedDerivativeStep, 0.5 * y);
    auto central = [&](double step) { return (bvp_value(y + step) - bvp_value(y - step)) / (2.0 * step); };
    const double d = (4.0 * central(0.5 * h) - central(h)) / 3.0;
    return std::min(d, 0.0);
}

double kernel_K(const DiffusionSpec& spec, double y, double lambda) {
    if (spec.kind() == DiffusionKind::Tabulated && !(lambda > 0.0))
        throw PreconditionError("kernel_K: tabulated specs require lambda > 0");
    if (!(y >= 0.0)) throw DomainError("kernel_K: y must be >= 0");
    return KernelProfile(spec, lambda).value(y);
}

double dK_dy(const DiffusionSpec& spec, double y, double lambda) {
    if (spec.kind() == DiffusionKind::Tabulated && !(lambda > 0.0))
        throw PreconditionError("dK_dy: tabulated specs require lambda > 0");
    if (!(y > 0.0)) throw DomainError("dK_dy: y must be > 0");
    return KernelProfile(spec, lambda).dy(y);
}

// ---------------------------------------------------------------------------
// Occupation formula

double occupation_expectation(const DiffusionSpec& spec, const std::function<double(double)>& g, double y,
                              const std::vector<double>& breakpoints, const QuadratureConfig& cfg) {
    require_positive(y, "occupation_expectation: y");
    require_admissible(spec, "occupation_expectation");

    std::vector<double> pts{0.0, y};
    for (double b : breakpoints)
        if (b > 0.0 && std::isfinite(b)) pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const double end = pts.back();
    const double scale = std::max(1.0, end);

    // Integrability of h|g|/a² (the condition under which the formula holds).
    auto weight = [&](double z) {
        if (z <= 0.0) return 0.0;
        const double gz = g(z);
        if (gz == 0.0) return 0.0;
        const double av = spec.a(z);
        return std::exp(log_h_of(spec, z)) * std::abs(gz) / (av * av);
    };
    double mass = 0.0;
    try {
        mass = adaptive_integrate(weight, pts, cfg).value + integrate_tail(weight, end, scale, cfg);
    } catch (const NumericError& e) {
        throw DomainError(std::string("occupation_expectation: int h|g|/a^2 appears divergent: ") + e.what());
    }
    if (!std::isfinite(mass)) throw DomainError("occupation_expectation: int h|g|/a^2 is not finite");
    if (mass == 0.0) return 0.0;
    // The tan-mapped tail quadrature returns a large finite number for
    // non-integrable tails, so also require z·weight(z) → 0 far out.
    {
        const double near = adaptive_integrate(weight, {0.0, end + scale}, cfg).value;
        const double far = end + 1e8 * scale;
        if (far * weight(far) > 1e-6 * std::max(near, 1e-300))
            throw DomainError("occupation_expectation: int h|g|/a^2 diverges (integrand decays no faster than 1/z)");
    }

    auto integrand = [&](double z) {
        if (z <= 0.0) return 0.0;
        const double gz = g(z);
        if (gz == 0.0) return 0.0;
        return green(spec, y, z) * gz;
    };
    try {
        return adaptive_integrate(integrand, pts, cfg).value + integrate_tail(integrand, end, scale, cfg);
    } catch (const NumericError& e) {
        throw DomainError(std::string("occupation_expectation: integral diverges: ") + e.what());
    }
}

}  // namespace gvmult
