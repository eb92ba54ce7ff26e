// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Oracles are closed forms written out here rather than taken from the
// library, except where the criterion itself names the library routine as the
// reference (occupation_expectation, heat_semigroup).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gvmult/montecarlo.hpp"
#include "gvmult/multiplier.hpp"
#include "gvmult/norm_probe.hpp"
#include "gvmult/special_fn.hpp"
#include "gvmult/torus_spectral.hpp"
#include "gvmult/vertical_diffusion.hpp"

using namespace gvmult;

namespace {

constexpr double kPi = std::numbers::pi;

int failures = 0;

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

void run(int id, const char* name, const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string format(const char* fmt, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    return buf;
}

// BM with drift, μ = m/σ, R = √(λ+μ²): φ = ¼(1 − μ/R), t = −1/(4R), s = 1/(4R(R−μ)).
double bm_phi(double sigma, double m, double l) {
    const double mu = m / sigma;
    return 0.25 * (1.0 - mu / std::sqrt(l + mu * mu));
}
double bm_t(double sigma, double m, double l) { return -0.25 / std::sqrt(l + (m / sigma) * (m / sigma)); }
double bm_s(double sigma, double m, double l) {
    const double mu = m / sigma, r = std::sqrt(l + mu * mu);
    return 0.25 / (r * (r - mu));
}

double bessel_t(double s, double l) {
    return -kPi * kPi * std::tgamma(4.0 * s) / (std::pow(2.0, 8.0 * s) * s * s * std::pow(std::tgamma(s), 4)) /
           std::sqrt(l);
}
double bessel_s(double s, double l) { return s / (2.0 * s + 1.0) / l; }

const std::vector<double> kLambdas = {0.1, 1.0, 10.0, 100.0};

// ---------------------------------------------------------------------------

bool multiplier_closed_forms(std::string& detail) {
    double worst_bm = 0.0, worst_be = 0.0;
    for (double sigma : {1.0, 2.0})
        for (double m : {0.0, 1.0, 2.0}) {
            const auto spec = DiffusionSpec::bm_drift(sigma, m);
            for (double l : kLambdas) {
                const double e = phi_extension(spec, l), a = phi_alt(spec, l), c = bm_phi(sigma, m, l);
                worst_bm = std::max({worst_bm, rel(e, c), rel(a, c), rel(e, a)});
            }
        }
    for (double s : {0.25, 0.5, 0.75}) {
        const auto spec = DiffusionSpec::bessel(s);
        const double gamma = 1.0 - 2.0 * s, c = 1.0 / (2.0 * (2.0 - gamma));
        for (double l : kLambdas) worst_be = std::max({worst_be, rel(phi_extension(spec, l), c), rel(phi_alt(spec, l), c)});
    }
    detail = format("BMDrift max rel gap %.2e (tol 1e-6), Bessel %.2e (tol 1e-5)", worst_bm, worst_be);
    return worst_bm <= 1e-6 && worst_be <= 1e-5;
}

bool macdonald_identity(std::string& detail) {
    const std::vector<std::pair<double, double>> pairs = {{2, 0.5}, {1, 0.25},  {3, 0.2}, {2, 0.1},    {4, 1},
                                                          {3, 1},   {1.5, 0.5}, {5, 2},   {2.5, 0.75}, {6, 1.5}};
    double worst = 0.0;
    for (auto [a, nu] : pairs) {
        const double closed = std::sqrt(kPi) * std::tgamma(a / 2) * std::tgamma(a / 2 - nu) * std::tgamma(a / 2 + nu) /
                              (4.0 * std::tgamma((1.0 + a) / 2));
        const auto r = mcd2_pair(a, nu);
        worst = std::max({worst, rel(r.lhs, r.rhs), rel(r.lhs, closed), rel(r.rhs, closed)});
    }
    const auto q = mcd2_pair(2.0, 0.5);
    const double pi4 = std::max(rel(q.lhs, kPi / 4), rel(q.rhs, kPi / 4));
    detail = format("10 pairs max rel gap %.2e, (2,1/2) vs pi/4 %.2e (tol 1e-6)", worst, pi4);
    return worst <= 1e-6 && pi4 <= 1e-6;
}

bool symbol_lemmas(std::string& detail) {
    double worst = 0.0;
    for (double sigma : {1.0, 2.0})
        for (double m : {0.0, 1.0, 2.0}) {
            const auto spec = DiffusionSpec::bm_drift(sigma, m);
            for (double l : kLambdas) {
                worst = std::max(worst, rel(t_symbol(spec, l), bm_t(sigma, m, l)));
                worst = std::max(worst, rel(s_symbol(spec, l), bm_s(sigma, m, l)));
            }
        }
    for (double s : {0.25, 0.5, 0.75}) {
        const auto spec = DiffusionSpec::bessel(s);
        for (double l : kLambdas) {
            worst = std::max(worst, rel(t_symbol(spec, l), bessel_t(s, l)));
            worst = std::max(worst, rel(s_symbol(spec, l), bessel_s(s, l)));
        }
    }
    // Bessel s = 1/2 is BM with σ = 1, m = 0: both constants are 1/4 in magnitude.
    const auto half = DiffusionSpec::bessel(0.5), bm = DiffusionSpec::bm_drift(1.0, 0.0);
    const double cross = std::max({rel(t_symbol(half, 1.0), -0.25), rel(t_symbol(bm, 1.0), -0.25),
                                   rel(s_symbol(half, 1.0), 0.25), rel(s_symbol(bm, 1.0), 0.25),
                                   rel(bessel_t(0.5, 1.0), -0.25), rel(bessel_s(0.5, 1.0), 0.25)});
    detail = format("max rel gap %.2e, s=1/2 cross-check %.2e (tol 1e-5)", worst, cross);
    return worst <= 1e-5 && cross <= 1e-5;
}

std::vector<double> uniform(double lo, double h, int n) {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = lo + h * i;
    return y;
}

bool stinga_torrea(std::string& detail) {
    const TorusGrid g{1, 64};
    const auto sinx = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x)); });
    const auto three = TorusField::sample(
        g, [](double x, double) { return cplx(std::sin(x) + 0.5 * std::cos(2.0 * x) - 0.25 * std::sin(3.0 * x)); });
    const auto V = TorusField::sample(g, [](double x, double) { return cplx(-1.0 - std::cos(x)); });
    double lo = 1e300, hi = 0.0;
    for (const auto& spec : {DiffusionSpec::bm_drift(1.0, 1.0), DiffusionSpec::bessel(0.25)})
        for (bool with_v : {false, true}) {
            const auto bg = with_v ? SpectralBackground::schrodinger(schrodinger_build(g, V)) : SpectralBackground::laplacian(g);
            for (const TorusField* f : {&sinx, &three}) {
                // Same interior interval [0.55, 2.45] at y-steps 0.05 and 0.025.
                const double r1 = stinga_torrea_residual(spec, bg, *f, uniform(0.5, 0.05, 41));
                const double r2 = stinga_torrea_residual(spec, bg, *f, uniform(0.525, 0.025, 79));
                lo = std::min(lo, r1 / r2);
                hi = std::max(hi, r1 / r2);
            }
        }
    detail = format("8 cases, ratio range [%.4f, %.4f] (need within [3.5, 4.5])", lo, hi);
    return lo >= 3.5 && hi <= 4.5;
}

// --- Monte Carlo criteria, parameterised so criterion 10 can rerun them ----

struct Digest {
    std::string bytes;
    void add(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%a;", v);
        bytes += buf;
    }
    void add(const EnsembleResult& r) {
        for (Eigen::Index b = 0; b < r.estimate.values.size(); ++b) {
            add(r.estimate.values[b].real());
            add(r.estimate.values[b].imag());
            add(r.std_error[b]);
            add(static_cast<double>(r.n_effective[b]));
        }
        add(static_cast<double>(r.flagged_paths));
        add(r.mean_tau);
    }
};


bool gv_monte_carlo(std::int64_t paths, int threads, std::string& detail, Digest* digest) {
    const double sigma = 0.5, m = 0.5;
    const auto spec = DiffusionSpec::bm_drift(sigma, m);
    const TorusGrid g{1, 64};
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::sin(x) + 0.5 * std::cos(2.0 * x)); });
    MCConfig mc;
    mc.n_paths = paths;
    mc.n_bins = 32;
    mc.dt = 1e-3;
    mc.y0 = 6.0;
    mc.seed = 1;
    mc.threads = threads;
    const auto batch = gv_estimate_all(f, spec, nullptr, mc);
    if (digest) {
        digest->add(batch.W);
        digest->add(batch.T[0]);
        digest->add(batch.S[0][0]);
        return true;
    }

    const double w = 2.0 * kPi / 32;
    auto avg_sin = [w](int k, double lo) { return (std::cos(k * lo) - std::cos(k * (lo + w))) / (k * w); };
    auto avg_cos = [w](int k, double lo) { return (std::sin(k * (lo + w)) - std::sin(k * lo)) / (k * w); };
    // W f = φ(1) sin x + ½φ(4) cos 2x; T f = t(1) cos x − t(4) sin 2x; S f = s(1) sin x + 2 s(4) cos 2x.
    const std::vector<std::pair<std::string, std::function<double(double)>>> oracles = {
        {"W",
         [&](double lo) { return bm_phi(sigma, m, 1) * avg_sin(1, lo) + 0.5 * bm_phi(sigma, m, 4) * avg_cos(2, lo); }},
        {"T0", [&](double lo) { return bm_t(sigma, m, 1) * avg_cos(1, lo) - bm_t(sigma, m, 4) * avg_sin(2, lo); }},
        {"S00", [&](double lo) { return bm_s(sigma, m, 1) * avg_sin(1, lo) + 2.0 * bm_s(sigma, m, 4) * avg_cos(2, lo); }},
    };
    const std::vector<const EnsembleResult*> ests = {&batch.W, &batch.T[0], &batch.S[0][0]};
    bool ok = true;
    for (std::size_t o = 0; o < oracles.size(); ++o) {
        const auto& est = *ests[o];
        int within = 0, counted = 0;
        double err2 = 0.0, ref2 = 0.0;
        for (int b = 0; b < 32; ++b) {
            const double exact = oracles[o].second(b * w);
            const double diff = std::abs(est.estimate.values[b] - cplx(exact));
            err2 += diff * diff;
            ref2 += exact * exact;
            if (est.empty_bin(b)) continue;
            ++counted;
            if (diff <= 2.0 * est.std_error[b]) ++within;
        }
        const double frac = counted ? static_cast<double>(within) / counted : 0.0, r = std::sqrt(err2 / ref2);
        const bool pass = frac >= 0.9 && r <= 0.1;
        ok = ok && pass;
        detail += oracles[o].first + format(" %.3f within 2SE, rel err %.4f; ", frac, r);
    }
    detail += "need >= 0.9 and <= 0.1";
    return ok;
}

struct OccCase {
    const char* name;
    DiffusionSpec spec;
    std::function<double(double)> g;
    double y0;
    std::optional<double> top;
    std::vector<double> breaks;
    double closed;
};

std::vector<OccCase> occupation_cases() {
    return {
        // E^y τ = y/(2m).
        {"BMDrift(1,1) g=1 y=1", DiffusionSpec::bm_drift(1.0, 1.0), [](double) { return 1.0; }, 1.0, {}, {}, 0.5},
        // ∫ min(y,z)(1−z)⁺ dz at y = 1/2 is 7/48.
        {"BMDrift(1,0) g=(1-y)+ y=1/2", DiffusionSpec::bm_drift(1.0, 0.0),
         [](double y) { return std::max(0.0, 1.0 - y); }, 0.5, 1.0, {1.0}, 7.0 / 48.0},
        // s(z) = 2√z, m(z) = √z: ∫ s(1∧z) z m(z) dz over (0,2) = 2/3 + 0.8(2^{5/2} − 1).
        {"Bessel(1/4) g=y1[y<2] y=1", DiffusionSpec::bessel(0.25), [](double y) { return y < 2.0 ? y : 0.0; }, 1.0, 2.0,
         {2.0}, 2.0 / 3.0 + 0.8 * (std::pow(2.0, 2.5) - 1.0)},
    };
}

bool occupation(std::int64_t paths, int threads, std::string& detail, Digest* digest) {
    MCConfig mc;
    mc.n_paths = paths;
    mc.dt = 1e-3;
    mc.seed = 1;
    mc.threads = threads;
    bool ok = true;
    for (const auto& c : occupation_cases()) {
        const auto r = occupation_mc(c.spec, c.g, c.y0, mc, c.top);
        if (digest) {
            digest->add(r.mean);
            digest->add(r.std_error);
            digest->add(static_cast<double>(r.flagged_paths));
            continue;
        }
        const double formula = occupation_expectation(c.spec, c.g, c.y0, c.breaks);
        const double z = std::abs(r.mean - formula) / r.std_error;
        const bool pass = z <= 3.0 && rel(formula, c.closed) <= 1e-6 && r.flagged_paths == 0;
        ok = ok && pass;
        detail += std::string(c.name) + format(" z=%.2f; ", z);
    }
    detail += "need z <= 3";
    return ok;
}

bool feynman_kac(std::int64_t paths, int threads, std::string& detail, Digest* digest) {
    const TorusGrid g{1, 64};
    const auto V = TorusField::sample(g, [](double x, double) { return cplx(-1.0 - std::cos(x)); });
    const auto f = TorusField::sample(g, [](double x, double) { return cplx(std::cos(x) + 0.5 * std::sin(2.0 * x) + 0.3); });
    MCConfig mc;
    mc.n_paths = paths;
    mc.n_bins = 32;
    mc.dt = 1e-3;
    mc.seed = 1;
    mc.threads = threads;
    const auto est = fk_estimate(V, 0.5, f, mc);
    if (digest) {
        digest->add(est);
        return true;
    }
    const auto exact = heat_semigroup(*schrodinger_build(g, V), 0.5, f);
    const Eigen::VectorXcd c = forward_transform(exact);
    double err2 = 0.0, ref2 = 0.0;
    for (Eigen::Index b = 0; b < est.estimate.values.size(); ++b) {
        const double x = est.bin_center(b)[0];
        cplx e = 0.0;
        for (Eigen::Index i = 0; i < c.size(); ++i) e += c[i] * std::polar(1.0, g.frequency(static_cast<int>(i)) * x);
        err2 += std::norm(est.estimate.values[b] - e);
        ref2 += std::norm(e);
    }
    const double r = std::sqrt(err2 / ref2);
    detail = format("relative 2-norm error %.4f over 32 start points (tol 0.05)", r);
    return r <= 0.05;
}

bool bound_suite(std::string& detail) {
    const auto reports = verify_bound_suite({1.5, 2.0, 3.0, 4.0, 8.0});
    int bad = 0;
    double worst = 0.0;
    std::string worst_id;
    for (const auto& r : reports) {
        if (r.best_ratio > r.bound * 1.02) ++bad;
        if (r.best_ratio / r.bound > worst) {
            worst = r.best_ratio / r.bound;
            worst_id = r.op + " p=" + format("%g", r.p);
        }
    }
    double r0 = 1e300;
    for (const auto& r : reports)
        if (r.p == 2.0 && r.op.rfind("R0[theta=0]", 0) == 0) r0 = std::min(r0, r.best_ratio);
    detail = format("%.0f reports, %.0f over bound*1.02, max ratio/bound %.4f", static_cast<double>(reports.size()), bad,
                    worst) +
             " (" + worst_id + format("); R0 at p=2 best ratio %.4f (need >= 0.98)", r0);
    return bad == 0 && r0 >= 0.98 && !reports.empty();
}

bool limit_checks(std::string& detail) {
    double gap = 0.0;
    for (int dim : {1, 2})
        for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 1}}) {
            if (dim == 1 && (i > 0 || j > 0)) continue;
            const auto op = second_riesz_symbol(i, j, 1e3, dim);
            const auto lim = second_riesz_symbol(i, j, AT_INFINITY, dim);
            for (int k0 = -32; k0 < 32; ++k0)
                for (int k1 = (dim == 2 ? -32 : 0); k1 < (dim == 2 ? 32 : 1); ++k1) {
                    if (k0 == 0 && k1 == 0) continue;
                    const Freq k{k0, k1};
                    const double q = k0 * k0 + k1 * k1;
                    const double oracle = -2.0 * k[i] * k[j] / q;
                    gap = std::max({gap, std::abs(op.symbol(k) - oracle), std::abs(lim.symbol(k) - oracle)});
                }
        }
    bool choi = true;
    std::string cp;
    for (double p : {20.0, 40.0, 80.0}) {
        const double ps = std::max(p, p / (p - 1.0));
        const double c = constants(p).c_p_asymptotic;
        choi = choi && c >= std::max(1.0, ps / 2 - 1) && c <= ps / 2;
        cp += format("c_%g=%.4f ", p, c);
    }
    detail = format("sup gap at theta=1e3 %.2e (tol 1e-3); ", gap) + cp + (choi ? "within" : "outside") + " Choi bounds";
    return gap <= 1e-3 && choi;
}

bool determinism(std::string& detail) {
    // Reduced path counts; the per-path seeding and ordered reduction do not
    // depend on the count.
    std::string base;
    bool ok = true;
    for (int threads : {1, 2, 8}) {
        Digest d;
        std::string unused;
        gv_monte_carlo(20000, threads, unused, &d);
        occupation(10000, threads, unused, &d);
        feynman_kac(20000, threads, unused, &d);
        if (threads == 1) base = d.bytes;
        else ok = ok && d.bytes == base;
    }
    detail = format("criteria 5-7 at 2e4/1e4/2e4 paths, %.0f bytes of hex-float output, threads 1/2/8 ",
                    static_cast<double>(base.size())) +
             (ok ? "identical" : "DIFFER");
    return ok && !base.empty();
}

}  // namespace

int main() {
    run(1, "multiplier closed forms", multiplier_closed_forms);
    run(2, "MacDonald identity", macdonald_identity);
    run(3, "symbol lemmas", symbol_lemmas);
    run(4, "Stinga-Torrea second order", stinga_torrea);
    run(5, "Gundy-Varopoulos Monte Carlo", [](std::string& d) { return gv_monte_carlo(200000, 1, d, nullptr); });
    run(6, "occupation formula", [](std::string& d) { return occupation(100000, 1, d, nullptr); });
    run(7, "Feynman-Kac", [](std::string& d) { return feynman_kac(200000, 1, d, nullptr); });
    run(8, "bound suite", bound_suite);
    run(9, "limit checks", limit_checks);
    run(10, "determinism", determinism);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
