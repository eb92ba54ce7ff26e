#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "gvmult/errors.hpp"
#include "gvmult/norm_probe.hpp"

using namespace gvmult;

namespace {

// Dense matrix of the operator on real inputs; its top singular value is the
// exact 2→2 norm over real fields.
double dense_two_norm(const ProbeOperator& op) {
    const Eigen::Index N = op.grid.size();
    Eigen::MatrixXd M(2 * N, N);
    for (Eigen::Index j = 0; j < N; ++j) {
        TorusField e = TorusField::zeros(op.grid);
        e.values[j] = 1.0;
        const auto col = op.apply(e).values;
        M.block(0, j, N, 1) = col.real();
        M.block(N, j, N, 1) = col.imag();
    }
    return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

}  // namespace

TEST_CASE("ratio homogeneity") {
    const TorusGrid g{1, 32};
    const auto op = ProbeOperator::from_symbol("R", riesz_symbol(0, 1.0, 1), g, [](double) { return 1.0; }, "");
    auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x) + 0.2 * std::cos(5 * x)); });
    const double r = lp_ratio(op, f, 3.0);
    f.values *= cplx(-4.0, 1.0);
    CHECK(lp_ratio(op, f, 3.0) == doctest::Approx(r).epsilon(1e-12));
    CHECK_THROWS_AS(lp_ratio(op, TorusField::zeros(g), 3.0), DomainError);
}

TEST_CASE("probe stays below the dense p=2 norm") {
    const TorusGrid g{1, 16};
    for (const auto& sym : {riesz_symbol(0, 1.0, 1), second_riesz_symbol(0, 0, 2.0, 1)}) {
        const auto op = ProbeOperator::from_symbol("op", sym, g, [](double) { return 10.0; }, "");
        const double exact = dense_two_norm(op);
        const auto rep = probe(op, 2.0, ProbeConfig{6, 9, 1, 4, 0.02});
        CHECK(rep.best_ratio <= exact + 1e-10);
        CHECK(rep.best_ratio > 0.5 * exact);
    }
}

TEST_CASE("constant symbol gives its modulus at every p") {
    const TorusGrid g{1, 64};
    const auto w = ProbeOperator::from_symbol("W", w_operator(DiffusionSpec::bm_drift(1.0, 0.0), g), g,
                                              [](double p) { return 0.5 * constants(p).burkholder; }, "");
    for (double p : {1.5, 4.0}) {
        const auto rep = probe(w, p, ProbeConfig{2, 1, 1, 2, 0.02});
        CHECK(rep.best_ratio == doctest::Approx(0.25).epsilon(1e-8));
        CHECK(rep.passed());
    }
}

TEST_CASE("Riesz at p=2 is attained") {
    const auto cat = bound_catalog({"R0[theta=0]"});
    REQUIRE(cat.size() == 1);
    const auto rep = probe(cat[0], 2.0, ProbeConfig{2, 1, 1, 2, 0.02});
    CHECK(rep.best_ratio >= 0.98);
    CHECK(rep.best_ratio <= 1.0 + 1e-10);
}

TEST_CASE("probe is deterministic and thread independent") {
    const auto cat = bound_catalog({"R0^2-R1^2"});
    const auto a = probe(cat[0], 4.0, ProbeConfig{4, 5, 1, 2, 0.02});
    const auto b = probe(cat[0], 4.0, ProbeConfig{4, 5, 3, 2, 0.02});
    CHECK(a.best_ratio == b.best_ratio);
    CHECK(a.witness.values == b.witness.values);
    CHECK(a.best_ratio <= 3.0 * 1.02);
}

TEST_CASE("catalog selection") {
    CHECK(bound_catalog().size() >= 14);
    CHECK(bound_catalog({"BeurlingAhlfors", "BeurlingAhlfors"}).size() == 1);
    CHECK_THROWS_AS(bound_catalog({"nope"}), DomainError);
    const auto reps = verify_bound_suite({2.0, 2.0, 3.0}, ProbeConfig{1, 1, 1, 1, 0.02}, {"R0[theta=1]"});
    CHECK(reps.size() == 2);
}

TEST_CASE("Bessel Riesz constant") {
    CHECK(bessel_riesz_constant(0.5) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(bessel_riesz_constant(0.25) > 1.0);
    CHECK(bessel_riesz_constant(0.75) > 1.0);
}

TEST_CASE("diagonal second-order operator exceeds p*-1 at p=2") {
    // 2R_1² on T¹ is −2 on every nonzero mode: its norm is 2 at every p, above
    // p*−1 = 1 at p = 2. The catalog therefore uses only i ≠ j.
    const TorusGrid g{1, 32};
    const auto op = ProbeOperator::from_symbol("2R^2", second_riesz_symbol(0, 0, AT_INFINITY, 1), g,
                                               [](double p) { return constants(p).burkholder; }, "");
    const auto rep = probe(op, 2.0, ProbeConfig{2, 1, 1, 1, 0.02});
    CHECK(rep.best_ratio == doctest::Approx(2.0).epsilon(1e-10));
    CHECK_FALSE(rep.passed());
}
