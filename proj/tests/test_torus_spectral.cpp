#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gvmult/errors.hpp"
#include "gvmult/torus_spectral.hpp"

using namespace gvmult;

namespace {

constexpr double kPi = std::numbers::pi;

TorusField random_field(const TorusGrid& g, unsigned seed, bool zero_mean) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n;
    TorusField f = TorusField::zeros(g);
    for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values[i] = cplx(n(rng), n(rng));
    if (zero_mean) f.values.array() -= f.mean();
    return f;
}

double max_diff(const TorusField& a, const TorusField& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("p-norms") {
    const TorusGrid g{1, 32};
    const auto one = TorusField::constant(g, 1.0);
    for (double p : {1.0, 2.0, 3.5}) CHECK(lp_norm(one, p) == doctest::Approx(std::pow(2.0 * kPi, 1.0 / p)));
    const auto f = random_field(g, 1, false);
    TorusField g3 = f;
    g3.values *= cplx(0.0, -3.0);
    CHECK(lp_norm(g3, 3.0) == doctest::Approx(3.0 * lp_norm(f, 3.0)));
    // Parseval: ‖f‖₂² = 2π Σ|c_k|².
    const auto c = forward_transform(f);
    CHECK(lp_norm(f, 2.0) == doctest::Approx(std::sqrt(2.0 * kPi * c.squaredNorm())).epsilon(1e-12));
}

TEST_CASE("transforms") {
    const TorusGrid g{2, 16};
    const auto f = random_field(g, 2, false);
    CHECK(max_diff(inverse_transform(g, forward_transform(f)), f) < 1e-12);
    // cos(2x0 − 3x1) has coefficient ½ at (2,−3) and (−2,3).
    const auto c = TorusField::sample(g, [](double x0, double x1) { return cplx(std::cos(2 * x0 - 3 * x1)); });
    const auto cc = forward_transform(c);
    CHECK(std::abs(cc[2 * 16 + (16 - 3)] - 0.5) < 1e-12);
    CHECK(std::abs(cc[(16 - 2) * 16 + 3] - 0.5) < 1e-12);
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS((TorusGrid{1, 12}.validate()), DomainError);
    CHECK_THROWS_AS((TorusGrid{3, 16}.validate()), DomainError);
    CHECK_THROWS_AS((TorusGrid{1, 4}.validate()), DomainError);
    CHECK_NOTHROW((TorusGrid{2, 8}.validate()));
}

TEST_CASE("Riesz compositions") {
    for (int dim : {1, 2}) {
        const TorusGrid g{dim, 16};
        const auto f = random_field(g, 3, true);
        TorusField sum = TorusField::zeros(g), sum2 = TorusField::zeros(g);
        for (int i = 0; i < dim; ++i) {
            const auto r = riesz_symbol(i, 0.0, dim);
            sum.values += apply_symbol(r * r, f).values;
            sum2.values += apply_symbol(second_riesz_symbol(i, i, AT_INFINITY, dim), f).values;
        }
        TorusField minus = f;
        minus.values = -f.values;
        CHECK(max_diff(sum, minus) < 1e-12);
        minus.values = -2.0 * f.values;
        CHECK(max_diff(sum2, minus) < 1e-12);
    }
}

TEST_CASE("Beurling-Ahlfors equals R1^2 - R2^2 - 2i R1 R2 in this sign convention") {
    const TorusGrid g{2, 16};
    const auto f = random_field(g, 4, true);
    const auto r1 = riesz_symbol(0, 0.0, 2), r2 = riesz_symbol(1, 0.0, 2);
    const auto composed = r1 * r1 - r2 * r2 - cplx(0.0, 2.0) * (r1 * r2);
    CHECK(max_diff(apply_symbol(beurling_ahlfors(2), f), apply_symbol(composed, f)) < 1e-12);
    // |symbol| = 1 off the zero mode.
    CHECK(lp_norm(apply_symbol(beurling_ahlfors(2), f), 2.0) == doctest::Approx(lp_norm(f, 2.0)).epsilon(1e-12));
}

TEST_CASE("second Riesz symbol approaches its limit") {
    const auto lim = second_riesz_symbol(0, 0, AT_INFINITY, 1);
    const auto far = second_riesz_symbol(0, 0, 1e6, 1);
    for (int k = 1; k < 32; ++k) CHECK(std::abs(far.symbol({k, 0}) - lim.symbol({k, 0})) < 1e-5);
    // θ = 0 gives R_iR_j.
    const auto zero = second_riesz_symbol(0, 1, 0.0, 2);
    CHECK(std::abs(zero.symbol({3, 4}) - cplx(-12.0 / 25.0)) < 1e-14);
}

TEST_CASE("contractions and translation invariance") {
    const TorusGrid g{2, 16};
    const auto f = random_field(g, 5, true);
    const std::vector<SymbolOperator> ops = {riesz_symbol(0, 0.0, 2), riesz_symbol(1, 2.0, 2),
                                             second_riesz_symbol(0, 1, 0.0, 2), beurling_ahlfors(2)};
    TorusField shifted = TorusField::zeros(g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const Eigen::Index i0 = i / 16, i1 = i % 16;
        shifted.values[((i0 + 3) % 16) * 16 + (i1 + 5) % 16] = f.values[i];
    }
    for (const auto& op : ops) {
        CHECK(lp_norm(apply_symbol(op, f), 2.0) <= lp_norm(f, 2.0) * (1.0 + 1e-12));
        const auto tf = apply_symbol(op, f), ts = apply_symbol(op, shifted);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const Eigen::Index i0 = i / 16, i1 = i % 16;
            worst = std::max(worst, std::abs(ts.values[((i0 + 3) % 16) * 16 + (i1 + 5) % 16] - tf.values[i]));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("zero mode policies") {
    const TorusGrid g{1, 16};
    const auto one = TorusField::constant(g, 1.0);
    const auto r = riesz_symbol(0, 0.0, 1);
    CHECK(apply_symbol(r, one).values.cwiseAbs().maxCoeff() < 1e-14);
    const SymbolOperator rej([](const Freq& k) { return cplx(k[0]); }, ZeroModePolicy::Reject, "rej");
    CHECK_THROWS_AS(apply_symbol(rej, one), DomainError);
    const SymbolOperator idn([](const Freq& k) { return cplx(k[0]); }, ZeroModePolicy::Identity, "id");
    CHECK(max_diff(apply_symbol(idn, one), one) < 1e-14);
}

TEST_CASE("Schrodinger path with V = 0 matches discrete Fourier symbols") {
    const TorusGrid g{1, 32};
    const auto op = schrodinger_build(g, TorusField::zeros(g));
    const auto f = random_field(g, 6, true);
    const auto phi = MultiplierSymbol::stieltjes_w(MeasureAlpha::dirac(1.0));
    const auto viaeig = apply_phi_schrodinger(phi, *op, f);
    const SymbolOperator discrete(
        [&](const Freq& k) { return phi(discrete_laplacian_eigenvalue(g, k)); }, ZeroModePolicy::Evaluate, "d");
    CHECK(max_diff(viaeig, apply_symbol(discrete, f)) < 1e-10);
    // Heat semigroup on sin x decays at the discrete rate.
    const auto s = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x)); });
    const double lam = discrete_laplacian_eigenvalue(g, {1, 0});
    const auto hs = heat_semigroup(*op, 0.7, s);
    TorusField expect = s;
    expect.values *= std::exp(-0.7 * lam);
    CHECK(max_diff(hs, expect) < 1e-10);
}

TEST_CASE("Schrodinger operator guards") {
    const TorusGrid g{1, 16};
    CHECK_THROWS_AS(schrodinger_build(g, TorusField::constant(g, 0.5)), DomainError);
    const TorusGrid big{2, 128};
    CHECK_THROWS_AS(schrodinger_build(big, TorusField::zeros(big)), ResourceError);
    const auto op = schrodinger_build(g, TorusField::sample(g, [](double x, double) { return cplx(-1.0 - std::cos(x)); }));
    const auto& ev = op->eigenvalues();
    for (Eigen::Index i = 1; i < ev.size(); ++i) CHECK(ev[i] <= ev[i - 1]);
    CHECK(ev[0] < 0.0);
}

TEST_CASE("W, T and S operators on a single mode") {
    const TorusGrid g{1, 32};
    const auto spec = DiffusionSpec::bm_drift(1.0, 0.0);
    const auto s = TorusField::sample(g, [](double x, double) { return cplx(std::sin(2.0 * x)); });
    const auto c = TorusField::sample(g, [](double x, double) { return cplx(std::cos(2.0 * x)); });
    // Φ ≡ ¼; T = −¼ (−Δ)^{−1/2}∂; S = ¼ (−Δ)^{−1}(−∂²)… on sin 2x: T sin = −¼ cos, S sin = ¼ sin.
    TorusField w = s, t = c, ss = s;
    w.values *= 0.25;
    t.values *= -0.25;
    ss.values *= 0.25;
    CHECK(max_diff(apply_symbol(w_operator(spec, g), s), w) < 1e-8);
    CHECK(max_diff(apply_symbol(t_operator(spec, 0, g), s), t) < 1e-8);
    CHECK(max_diff(apply_symbol(s_operator(spec, 0, 0, g), s), ss) < 1e-8);
}

TEST_CASE("Stinga-Torrea residual converges at second order") {
    const TorusGrid g{1, 32};
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x) + 0.3 * std::cos(3.0 * x)); });
    auto grid = [](double lo, double h, int n) {
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) y[i] = lo + h * i;
        return y;
    };
    const auto spec = DiffusionSpec::bessel(0.5);
    const auto bg = SpectralBackground::laplacian(g);
    // Same interior interval [0.55, 2.45] at steps 0.05 and 0.025.
    const double r1 = stinga_torrea_residual(spec, bg, f, grid(0.5, 0.05, 41));
    const double r2 = stinga_torrea_residual(spec, bg, f, grid(0.525, 0.025, 79));
    CHECK(r1 < 1e-2);
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.02));
    // Over [0.5, 2.5] the first interior node moves by h/2 and the ratio drops to 4e^{−3h/2}.
    const double r3 = stinga_torrea_residual(spec, bg, f, grid(0.5, 0.025, 81));
    CHECK(r1 / r3 == doctest::Approx(4.0 * std::exp(-0.075)).epsilon(0.02));
    CHECK_THROWS_AS(stinga_torrea_residual(spec, bg, f, grid(0.5, 0.1, 20)), DomainError);
}
