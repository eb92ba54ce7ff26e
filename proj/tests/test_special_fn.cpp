#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gvmult/errors.hpp"
#include "gvmult/special_fn.hpp"

using namespace gvmult;

TEST_CASE("gamma at integers and half-integers") {
    CHECK(gvmult::gamma(5.0) == doctest::Approx(24.0).epsilon(1e-14));
    CHECK(gvmult::gamma(0.5) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
    CHECK(gvmult::gamma(2.5) == doctest::Approx(0.75 * std::sqrt(std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("half-integer MacDonald functions are elementary") {
    for (double x : {0.05, 0.5, 1.0, 3.0, 20.0}) {
        const double k12 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
        CHECK(bessel_k(0.5, x) == doctest::Approx(k12).epsilon(1e-11));
        CHECK(bessel_k(1.5, x) == doctest::Approx(k12 * (1.0 + 1.0 / x)).epsilon(1e-11));
        CHECK(bessel_k(2.5, x) == doctest::Approx(k12 * (1.0 + 3.0 / x + 3.0 / (x * x))).epsilon(1e-11));
    }
}

TEST_CASE("K_0 and K_1 reference values") {
    CHECK(bessel_k(0.0, 1.0) == doctest::Approx(0.42102443824070834).epsilon(1e-12));
    CHECK(bessel_k(1.0, 1.0) == doctest::Approx(0.60190723019723457).epsilon(1e-12));
    CHECK(bessel_k(0.0, 0.1) == doctest::Approx(2.4270690247020166).epsilon(1e-12));
}

TEST_CASE("order symmetry is exact") {
    for (double s : {0.25, 0.75, 1.3})
        for (double x : {0.1, 1.0, 7.0}) CHECK(bessel_k(-s, x) == bessel_k(s, x));
}

TEST_CASE("scaled form survives large arguments") {
    CHECK(bessel_k_scaled(0.5, 800.0) == doctest::Approx(std::sqrt(std::numbers::pi / 1600.0)).epsilon(1e-11));
    CHECK(std::isfinite(bessel_k_scaled(0.3, 1e4)));
}

TEST_CASE("recurrence K_{s+1} = K_{s-1} + (2s/x) K_s") {
    for (double s : {0.3, 0.8})
        for (double x : {0.4, 2.0}) {
            const double lhs = bessel_k(s + 1.0, x);
            const double rhs = bessel_k(s - 1.0, x) + 2.0 * s / x * bessel_k(s, x);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
}

TEST_CASE("bessel_k domain") {
    CHECK_THROWS_AS(bessel_k(0.5, 0.0), DomainError);
    CHECK_THROWS_AS(bessel_k(0.5, -1.0), DomainError);
}

TEST_CASE("mcd2 pair") {
    const auto r = mcd2_pair(2.0, 0.5);
    CHECK(r.rhs == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-14));
    CHECK(r.lhs == doctest::Approx(r.rhs).epsilon(1e-8));
    // α = 1, ν = 1/4: Γ(1/4)Γ(3/4) = π√2, so the value is π²√2/4.
    const auto q = mcd2_pair(1.0, 0.25);
    CHECK(q.rhs == doctest::Approx(std::numbers::pi * std::numbers::pi * std::sqrt(2.0) / 4.0).epsilon(1e-13));
    CHECK(q.lhs == doctest::Approx(q.rhs).epsilon(1e-8));
    CHECK_THROWS_AS(mcd2_pair(1.0, 0.5), DomainError);
    CHECK_THROWS_AS(mcd2_pair(1.0, 0.0), DomainError);
}
