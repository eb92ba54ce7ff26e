#pragma once

// Global adaptive Gauss-Kronrod (10/21 point) quadrature.
//
// Every integral in the library goes through this one scheme so that error
// budgets compose predictably. Integrands may be real or complex valued; the
// error norm is std::abs.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <sstream>
#include <type_traits>
#include <vector>

#include "gvmult/errors.hpp"

namespace gvmult {

struct QuadratureConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_subdivisions = 4000;

    /// Throws DomainError when a tolerance is non-positive or max_subdivisions < 1.
    void validate() const;
};

template <typename T>
struct QuadratureResult {
    T value{};
    double abs_error = 0.0;
    int intervals = 0;
};

namespace detail {

extern const std::array<double, 11> kKronrodNodes;
extern const std::array<double, 11> kKronrodWeights;
extern const std::array<double, 5> kGaussWeights;

template <typename T>
struct Segment {
    double a, b;
    T value;
    double error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename T, typename F>
Segment<T> kronrod21(const F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const T fc = f(center);
    T gauss = T{} * 0.0;
    T kronrod = fc * kKronrodWeights[10];
    double resabs = std::abs(fc) * kKronrodWeights[10];
    std::array<T, 10> f1{}, f2{};
    for (int j = 0; j < 10; ++j) {
        const double dx = half * kKronrodNodes[j];
        f1[j] = f(center - dx);
        f2[j] = f(center + dx);
        const T sum = f1[j] + f2[j];
        kronrod += kKronrodWeights[j] * sum;
        resabs += kKronrodWeights[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
    }
    const T mean = kronrod * 0.5;
    double resasc = kKronrodWeights[10] * std::abs(fc - mean);
    for (int j = 0; j < 10; ++j)
        resasc += kKronrodWeights[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    const double ahalf = std::abs(half);
    resasc *= ahalf;
    resabs *= ahalf;
    double err = std::abs((kronrod - gauss) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);

    T value = kronrod * half;
    if (!std::isfinite(std::abs(value)) || !std::isfinite(err)) {
        std::ostringstream os;
        os << "non-finite integrand on [" << a << ", " << b << "]";
        throw NumericError(os.str());
    }
    return {a, b, value, err};
}

}  // namespace detail

/// Integrates f over the union of consecutive segments given by `breakpoints`
/// (at least two increasing values), bisecting the segment with the largest
/// error estimate until the total error meets the tolerance.
template <typename F>
auto adaptive_integrate(const F& f, const std::vector<double>& breakpoints, const QuadratureConfig& cfg = {})
    -> QuadratureResult<std::decay_t<decltype(f(0.0))>> {
    using T = std::decay_t<decltype(f(0.0))>;
    cfg.validate();
    if (breakpoints.size() < 2) throw DomainError("adaptive_integrate: need at least two breakpoints");

    std::priority_queue<detail::Segment<T>> heap;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i] < breakpoints[i + 1])) throw DomainError("adaptive_integrate: breakpoints must increase");
        heap.push(detail::kronrod21<T>(f, breakpoints[i], breakpoints[i + 1]));
    }

    auto totals = [&heap]() {
        auto copy = heap;
        T value = T{} * 0.0;
        double error = 0.0;
        while (!copy.empty()) {
            value += copy.top().value;
            error += copy.top().error;
            copy.pop();
        }
        return std::pair<T, double>(value, error);
    };

    auto [value, error] = totals();
    int intervals = static_cast<int>(heap.size());
    int since_resum = 0;
    while (error > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value))) {
        if (intervals >= cfg.max_subdivisions) {
            std::ostringstream os;
            os << "quadrature did not converge: estimate " << std::abs(value) << ", error " << error
               << " after " << intervals << " intervals (worst [" << heap.top().a << ", " << heap.top().b << "])";
            throw NumericError(os.str());
        }
        const auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(worst.a < mid && mid < worst.b)) {
            std::ostringstream os;
            os << "quadrature interval collapsed near " << mid << " with error " << worst.error;
            throw NumericError(os.str());
        }
        auto left = detail::kronrod21<T>(f, worst.a, mid);
        auto right = detail::kronrod21<T>(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++intervals;
        if (++since_resum == 64) {
            std::tie(value, error) = totals();
            since_resum = 0;
        }
    }
    std::tie(value, error) = totals();
    return {value, error, intervals};
}

template <typename F>
auto integrate(const F& f, double a, double b, const QuadratureConfig& cfg = {}) {
    return adaptive_integrate(f, {a, b}, cfg).value;
}

/// ∫₀^∞ f(y) dy through y = scale·tan(u), starting from the split y = scale.
template <typename F>
auto integrate_half_line(const F& f, double scale, const QuadratureConfig& cfg = {}) {
    using T = std::decay_t<decltype(f(0.0))>;
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("integrate_half_line: scale must be positive");
    auto mapped = [&](double u) -> T {
        const double c = std::cos(u);
        const T v = f(scale * std::tan(u));
        if (v == T{} * 0.0) return v;
        return v * (scale / (c * c));
    };
    constexpr double quarter = 0.78539816339744830962;
    return adaptive_integrate(mapped, {0.0, quarter, 2.0 * quarter}, cfg).value;
}

/// ∫_a^∞ f(y) dy, a ≥ 0, through y = a + scale·tan(u).
template <typename F>
auto integrate_tail(const F& f, double a, double scale, const QuadratureConfig& cfg = {}) {
    return integrate_half_line([&](double y) { return f(a + y); }, scale, cfg);
}

}  // namespace gvmult
