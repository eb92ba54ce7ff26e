#include "gvmult/special_fn.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "gvmult/errors.hpp"

namespace gvmult {

double gamma(double x) {
    if (!std::isfinite(x) || !(x > 0.0)) {
        std::ostringstream os;
        os << "gamma: argument must be positive and finite, got " << x;
        throw DomainError(os.str());
    }
    return std::tgamma(x);
}

double bessel_k_scaled(double s, double x, const QuadratureConfig& cfg) {
    if (!std::isfinite(x) || !(x > 0.0)) throw DomainError("bessel_k: x must be positive and finite");
    if (!std::isfinite(s) || !(std::abs(s) < 5.0)) throw DomainError("bessel_k: order must satisfy |s| < 5");
    const double order = std::abs(s);
    // exp(-x (cosh v - 1)) cosh(s v), written so that neither factor overflows.
    auto integrand = [x, order](double v) {
        const double sh = std::sinh(0.5 * v);
        const double exponent = -2.0 * x * sh * sh + order * v;
        if (!(exponent > -745.0)) return 0.0;
        return std::exp(exponent) * 0.5 * (1.0 + std::exp(-2.0 * order * v));
    };
    const double scale = x > 1.0 ? 1.0 / std::sqrt(x) : 1.0;
    return integrate_half_line(integrand, scale, cfg);
}

double bessel_k(double s, double x, const QuadratureConfig& cfg) {
    const double scaled = bessel_k_scaled(s, x, cfg);
    return scaled * std::exp(-x);
}

Mcd2Pair mcd2_pair(double alpha, double nu, const QuadratureConfig& cfg) {
    if (!(nu > 0.0) || !(alpha > 2.0 * nu) || !std::isfinite(alpha)) {
        std::ostringstream os;
        os << "mcd2_pair: requires alpha > 2 nu > 0, got alpha=" << alpha << " nu=" << nu;
        throw DomainError(os.str());
    }
    QuadratureConfig inner = cfg;
    inner.rel_tol = std::min(cfg.rel_tol, 1e-12);

    // (0, 1] through y = e^{-w}; the integrand then decays like e^{-(α-2ν)w}.
    auto near_zero = [&](double w) {
        // K_ν(e^{−w}) ~ e^{νw} overflows past νw ≈ 709, where the integrand
        // is already below e^{−(α−2ν)·700/ν}.
        const double y = std::exp(-w);
        if (y == 0.0 || nu * w > 700.0) return 0.0;
        const double k = bessel_k(nu, y, inner);
        return std::exp(-alpha * w + 2.0 * std::log(k));
    };
    auto far = [&](double y) {
        const double k = bessel_k_scaled(nu, y, inner);
        const double log_term = (alpha - 1.0) * std::log(y) - 2.0 * y;
        if (log_term < -745.0) return 0.0;
        return std::exp(log_term) * k * k;
    };
    const double lhs = integrate_half_line(near_zero, 1.0 / (alpha - 2.0 * nu), cfg) +
                       integrate_tail(far, 1.0, 1.0, cfg);
    const double rhs = std::sqrt(std::numbers::pi) / (4.0 * gamma(0.5 * (1.0 + alpha))) * gamma(0.5 * alpha) *
                       gamma(0.5 * alpha - nu) * gamma(0.5 * alpha + nu);
    return {lhs, rhs};
}

}  // namespace gvmult
