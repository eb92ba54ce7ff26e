#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gvmult/errors.hpp"
#include "gvmult/montecarlo.hpp"

using namespace gvmult;

TEST_CASE("config validation") {
    MCConfig c;
    CHECK_NOTHROW(c.validate());
    c.dt = 0.1;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = MCConfig{};
    c.antithetic = true;
    c.n_paths = 7;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = MCConfig{};
    c.n_bins = 12;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = MCConfig{};
    c.n_paths = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("wrap_torus") {
    const double two_pi = 2.0 * std::numbers::pi;
    CHECK(wrap_torus(-0.5) == doctest::Approx(two_pi - 0.5));
    CHECK(wrap_torus(7.0) == doctest::Approx(7.0 - two_pi));
    CHECK(wrap_torus(two_pi) == 0.0);
}

TEST_CASE("eta paths are reproducible and absorbed at 0") {
    MCConfig c;
    c.y0 = 1.0;
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const auto a = simulate_eta(spec, c, 17), b = simulate_eta(spec, c, 17), d = simulate_eta(spec, c, 18);
    CHECK(a.tau == b.tau);
    CHECK(a.eta == b.eta);
    CHECK(a.tau != d.tau);
    CHECK(a.absorbed);
    CHECK(a.eta.back() == 0.0);
    for (std::size_t i = 0; i + 1 < a.eta.size(); ++i) CHECK(a.eta[i] > 0.0);
}

TEST_CASE("hitting time moments for BM with drift") {
    // E τ = y/(2m) and E e^{−λτ} = e^{−ry}.
    MCConfig c;
    c.y0 = 1.0;
    c.seed = 3;
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const int n = 4000;
    double s = 0.0, s2 = 0.0, l = 0.0, l2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = simulate_eta(spec, c, i, false).tau;
        s += t;
        s2 += t * t;
        const double e = std::exp(-t);
        l += e;
        l2 += e * e;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 0.5) < 4.0 * se);
    const double lm = l / n, lse = std::sqrt((l2 / n - lm * lm) / n);
    const double r = 1.0 / (std::sqrt(2.0) + 1.0);
    CHECK(std::abs(lm - std::exp(-r)) < 4.0 * lse);
}

TEST_CASE("X increments have variance 2dt") {
    const TorusGrid g{2, 16};
    MCConfig c;
    const auto path = simulate_X(g, c, 5, 20000, std::array<double, 2>{0.0, 0.0});
    double v = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i)
        for (int d = 0; d < 2; ++d) v += std::pow(path[i][d] - path[i - 1][d], 2);
    v /= 2.0 * 20000.0;
    CHECK(v == doctest::Approx(2.0 * c.dt).epsilon(0.03));
}

TEST_CASE("bin averages") {
    const TorusGrid g{1, 64};
    const auto s = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x)); });
    const auto b = bin_average(s, 16);
    const double w = 2.0 * std::numbers::pi / 16.0;
    for (int i = 0; i < 16; ++i) {
        const double lo = i * w, hi = lo + w;
        CHECK(std::abs(b[i] - cplx((std::cos(lo) - std::cos(hi)) / w)) < 1e-12);
    }
    const auto one = bin_average(TorusField::constant(TorusGrid{2, 16}, 2.0), 8);
    CHECK((one.array() - cplx(2.0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("extension table reproduces the kernel") {
    const TorusGrid g{1, 32};
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(2.0 * x)); });
    const ExtensionTable table(spec, SpectralBackground::laplacian(g), f, 20.0);
    CHECK(table.mode_count() == 2);
    const double r = 4.0 / (std::sqrt(5.0) + 1.0);
    for (double y : {0.01, 0.3, 2.0, 7.5}) {
        const std::array<double, 2> x{0.7, 0.0};
        CHECK(std::abs(table.value(x, y) - std::exp(-r * y) * std::sin(1.4)) < 1e-7);
        cplx dy;
        std::array<cplx, 2> dx;
        table.gradient(x, y, dy, dx);
        CHECK(std::abs(dy + r * std::exp(-r * y) * std::sin(1.4)) < 1e-6);
        CHECK(std::abs(dx[0] - 2.0 * std::exp(-r * y) * std::cos(1.4)) < 1e-6);
    }
    CHECK_THROWS_AS(table.value({0.0, 0.0}, 25.0), NumericError);
}

TEST_CASE("GV estimates do not depend on the thread count") {
    const TorusGrid g{1, 32};
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x)); });
    MCConfig c;
    c.n_paths = 300;
    c.n_bins = 8;
    c.y0 = 2.0;
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const auto a = gv_estimate_all(f, spec, nullptr, c);
    c.threads = 3;
    const auto b = gv_estimate_all(f, spec, nullptr, c);
    CHECK(a.W.estimate.values == b.W.estimate.values);
    CHECK(a.T[0].std_error == b.T[0].std_error);
    CHECK(a.S[0][0].n_effective == b.S[0][0].n_effective);
}

TEST_CASE("GV estimate of T on sin x at modest size") {
    const TorusGrid g{1, 32};
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x)); });
    MCConfig c;
    c.n_paths = 6000;
    c.n_bins = 8;
    c.y0 = 4.0;
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const auto t = gv_estimate_Ti(f, 0, spec, nullptr, c);
    const auto oracle = bin_average(apply_symbol(t_operator(spec, 0, g), f), 8);
    for (int b = 0; b < 8; ++b) CHECK(std::abs(t.estimate.values[b] - oracle[b]) < 4.0 * t.std_error[b] + 0.01);
    CHECK_THROWS_AS(gv_estimate_Ti(f, 1, spec, nullptr, c), DomainError);
}

TEST_CASE("occupation Monte Carlo") {
    MCConfig c;
    c.n_paths = 4000;
    const auto spec = DiffusionSpec::bm_drift(1.0, 1.0);
    const auto r = occupation_mc(spec, [](double) { return 1.0; }, 1.0, c);
    CHECK(std::abs(r.mean - 0.5) < 4.0 * r.std_error);
    CHECK(r.flagged_paths == 0);
}

TEST_CASE("paths that exceed max_steps are flagged") {
    MCConfig c;
    c.n_paths = 200;
    c.max_steps = 2500;
    c.y0 = 5.0;
    // E τ = 2.5 from y = 5, so a 2.5 time-unit budget cuts off part of the paths.
    const auto r = occupation_mc(DiffusionSpec::bm_drift(1.0, 1.0), [](double) { return 1.0; }, 5.0, c);
    CHECK(r.flagged_paths > 0);
    CHECK(r.flagged_paths < 200);
    c.max_steps = 3;
    CHECK_THROWS_AS(occupation_mc(DiffusionSpec::bm_drift(1.0, 1.0), [](double) { return 1.0; }, 5.0, c), NumericError);
}

TEST_CASE("Feynman-Kac with V = -1 is a pure decay") {
    const TorusGrid g{1, 32};
    const auto V = TorusField::constant(g, -1.0);
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::cos(x)); });
    MCConfig c;
    c.n_paths = 8 * 2000;
    c.n_bins = 8;
    const auto r = fk_estimate(V, 0.3, f, c);
    // e^{t(Δ−1)} cos = e^{−2t} cos.
    for (Eigen::Index b = 0; b < 8; ++b) {
        const double x = r.bin_center(b)[0];
        CHECK(std::abs(r.estimate.values[b].real() - std::exp(-0.6) * std::cos(x)) < 4.0 * r.std_error[b] + 1e-3);
    }
    CHECK_THROWS_AS(fk_estimate(TorusField::constant(g, 1.0), 0.3, f, c), DomainError);
}
