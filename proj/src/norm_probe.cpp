#include "gvmult/norm_probe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "gvmult/errors.hpp"
#include "gvmult/special_fn.hpp"

namespace gvmult {

namespace {

double p_star(double p) { return std::max(p, p / (p - 1.0)); }
double burkholder(double p) { return p_star(p) - 1.0; }
double orthogonal(double p) { return 1.0 / std::tan(std::numbers::pi / (2.0 * p_star(p))); }

struct Basis {
    std::vector<Eigen::VectorXd> phi;     // real cosine/sine fields
    std::vector<Eigen::VectorXcd> image;  // T applied to each
    std::vector<double> freq_norm;        // |k| of the mode
};

Basis build_basis(const ProbeOperator& op) {
    const TorusGrid& g = op.grid;
    const int band = g.n / 4;
    Basis b;
    auto add = [&](int k0, int k1) {
        for (int part = 0; part < 2; ++part) {
            TorusField f = TorusField::sample(g, [&](double x0, double x1) {
                const double a = k0 * x0 + k1 * x1;
                return cplx(part == 0 ? std::cos(a) : std::sin(a));
            });
            b.phi.push_back(f.values.real());
            b.image.push_back(op.apply(f).values);
            b.freq_norm.push_back(std::sqrt(static_cast<double>(k0 * k0 + k1 * k1)));
        }
    };
    if (g.dim == 1) {
        for (int k = 1; k <= band; ++k) add(k, 0);
    } else {
        for (int k0 = 0; k0 <= band; ++k0)
            for (int k1 = -band; k1 <= band; ++k1) {
                if (k0 == 0 && k1 <= 0) continue;
                if (k0 * k0 + k1 * k1 > band * band) continue;
                add(k0, k1);
            }
    }
    return b;
}

double mean_abs_pow(const Eigen::VectorXcd& v, double p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
    return s / static_cast<double>(v.size());
}

double mean_abs_pow(const Eigen::VectorXd& v, double p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
    return s / static_cast<double>(v.size());
}

// The (2π)^{dim/p} factors cancel in the ratio.
double ratio_of(const Eigen::VectorXd& f, const Eigen::VectorXcd& tf, double p) {
    const double nf = mean_abs_pow(f, p);
    if (!(nf > 0.0)) return 0.0;
    return std::pow(mean_abs_pow(tf, p) / nf, 1.0 / p);
}

struct TrialResult {
    double ratio = 0.0;
    Eigen::VectorXd f;
};

TrialResult run_trial(const Basis& basis, double p, const ProbeConfig& cfg, int trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    const std::size_t M = basis.phi.size();

    std::vector<double> c(M, 0.0);
    if (trial % 2 == 0) {
        const double beta = unif(rng);
        for (std::size_t m = 0; m < M; ++m) c[m] = normal(rng) * std::pow(1.0 + basis.freq_norm[m], -beta);
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, M - 1);
        for (int r = 0; r < 3; ++r) c[pick(rng)] += normal(rng);
    }

    const Eigen::Index N = basis.phi[0].size();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(N);
    Eigen::VectorXcd tf = Eigen::VectorXcd::Zero(N);
    for (std::size_t m = 0; m < M; ++m) {
        if (c[m] == 0.0) continue;
        f += c[m] * basis.phi[m];
        tf += c[m] * basis.image[m];
    }
    double best = ratio_of(f, tf, p);

    for (int level = 0; level < cfg.levels; ++level) {
        double cmax = 0.0;
        for (double v : c) cmax = std::max(cmax, std::abs(v));
        const double delta = cmax * std::ldexp(1.0, -level - 1);
        for (std::size_t m = 0; m < M; ++m) {
            double best_step = 0.0;
            for (double step : {delta, -delta}) {
                const double r = ratio_of(f + step * basis.phi[m], tf + step * basis.image[m], p);
                if (r > best) {
                    best = r;
                    best_step = step;
                }
            }
            if (best_step != 0.0) {
                c[m] += best_step;
                f += best_step * basis.phi[m];
                tf += best_step * basis.image[m];
            }
        }
    }
    return {best, f};
}

}  // namespace

ProbeOperator ProbeOperator::from_symbol(std::string id, const SymbolOperator& op, const TorusGrid& grid,
                                         std::function<double(double)> bound, std::string source) {
    return {std::move(id), grid, [op](const TorusField& f) { return apply_symbol(op, f); }, std::move(bound),
            std::move(source)};
}

double lp_ratio(const ProbeOperator& op, const TorusField& f, double p) {
    const double nf = lp_norm(f, p);
    if (!(nf > 0.0)) throw DomainError("lp_ratio: zero field");
    return lp_norm(op.apply(f), p) / nf;
}

ProbeReport probe(const ProbeOperator& op, double p, const ProbeConfig& cfg) {
    if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("probe: need 1 < p < inf");
    if (cfg.trials < 1) throw DomainError("probe: trials must be >= 1");
    op.grid.validate();
    const Basis basis = build_basis(op);

    std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));
    int threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, cfg.trials);
    if (threads <= 1) {
        for (int t = 0; t < cfg.trials; ++t) results[t] = run_trial(basis, p, cfg, t);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (int t = w; t < cfg.trials; t += threads) results[t] = run_trial(basis, p, cfg, t);
            });
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    for (std::size_t t = 1; t < results.size(); ++t)
        if (results[t].ratio > results[best].ratio) best = t;

    ProbeReport r;
    r.op = op.id;
    r.p = p;
    r.best_ratio = results[best].ratio;
    r.bound = op.bound(p);
    r.bound_source = op.bound_source;
    r.witness = TorusField::zeros(op.grid);
    r.witness.values = results[best].f.cast<cplx>();
    r.trials = cfg.trials;
    r.seed = cfg.seed;
    r.tolerance = cfg.tolerance;
    return r;
}

double bessel_riesz_constant(double s) {
    const double g = gamma(s);
    return std::pow(2.0, 8.0 * s) * s * s * g * g * g * g /
           (4.0 * std::numbers::pi * std::numbers::pi * gamma(4.0 * s));
}

std::vector<ProbeOperator> bound_catalog(const std::vector<std::string>& select) {
    const TorusGrid t1{1, 64}, t2{2, 32};
    std::vector<ProbeOperator> cat;

    auto derivative = [](int axis) {
        return SymbolOperator([axis](const Freq& k) { return cplx(0.0, k[axis]); }, ZeroModePolicy::ZeroOut,
                              "d" + std::to_string(axis));
    };
    auto mixed = [](int i, int j) {
        return SymbolOperator([i, j](const Freq& k) { return cplx(-static_cast<double>(k[i]) * k[j]); },
                              ZeroModePolicy::ZeroOut, "d" + std::to_string(i) + "d" + std::to_string(j));
    };

    cat.push_back(ProbeOperator::from_symbol(
        "W[BMDrift(1,1)]", w_operator(DiffusionSpec::bm_drift(1.0, 1.0), t1), t1,
        [](double p) { return 0.5 * burkholder(p); }, "(p*-1)/2, Burkholder subordination"));
    cat.push_back(ProbeOperator::from_symbol(
        "W[Bessel(0.25)]", w_operator(DiffusionSpec::bessel(0.25), t1), t1,
        [](double p) { return 0.5 * burkholder(p); }, "(p*-1)/2, Burkholder subordination"));

    const MeasureAlpha aw = MeasureAlpha::dirac(0.0, 1.0) + MeasureAlpha::dirac(1.0, 0.5);
    const double aw_tv = total_variation(aw);
    cat.push_back(ProbeOperator::from_symbol(
        "StieltjesW[d0+0.5d1]", phi_symbol(MultiplierSymbol::stieltjes_w(aw), t1), t1,
        [aw_tv](double p) { return 2.0 * burkholder(p) * aw_tv; }, "2(p*-1)|alpha|, V=0"));
    {
        const TorusField V = TorusField::sample(t1, [](double x, double) { return cplx(-(1.0 + std::cos(x))); });
        auto sop = schrodinger_build(t1, V);
        const MultiplierSymbol phi = MultiplierSymbol::stieltjes_w(aw);
        cat.push_back({"StieltjesW[d0+0.5d1],V=-(1+cos)", t1,
                       [sop, phi](const TorusField& f) { return apply_phi_schrodinger(phi, *sop, f); },
                       [aw_tv](double p) { return 6.0 * burkholder(p) * aw_tv; }, "6(p*-1)|alpha|, V<=0"});
    }

    cat.push_back(ProbeOperator::from_symbol("R0[theta=0]", riesz_symbol(0, 0.0, 1), t1, orthogonal,
                                             "cot(pi/2p*), orthogonal martingales"));
    cat.push_back(ProbeOperator::from_symbol("R0[theta=1]", riesz_symbol(0, 1.0, 1), t1, orthogonal,
                                             "cot(pi/2p*)|alpha|, alpha=delta_1"));
    {
        const MeasureAlpha a1 = MeasureAlpha::dirac(0.0) + MeasureAlpha::dirac(1.0);
        const double tv = total_variation(a1);
        cat.push_back(ProbeOperator::from_symbol(
            "StieltjesR1[d0+d1]*d0", phi_symbol(MultiplierSymbol::stieltjes_r1(a1), t1) * derivative(0), t1,
            [tv](double p) { return tv * orthogonal(p); }, "cot(pi/2p*)|alpha|"));
    }
    for (double s : {0.25, 0.75}) {
        const double c = bessel_riesz_constant(s);
        std::ostringstream id;
        id << "BesselRiesz[s=" << s << "]";
        cat.push_back(ProbeOperator::from_symbol(
            id.str(), cplx(-4.0 * c) * t_operator(DiffusionSpec::bessel(s), 0, t1), t1,
            [c](double p) { return c * orthogonal(p); }, "2^{8s}s^2Gamma(s)^4/(4pi^2Gamma(4s)) cot(pi/2p*)"));
    }
    cat.push_back(ProbeOperator::from_symbol("R0[theta=0],T2", riesz_symbol(0, 0.0, 2), t2, orthogonal,
                                             "cot(pi/2p*), orthogonal martingales"));

    cat.push_back(ProbeOperator::from_symbol("SecondRiesz01[theta=inf]", second_riesz_symbol(0, 1, AT_INFINITY, 2),
                                             t2, burkholder, "(p*-1), space-time limit"));
    cat.push_back(ProbeOperator::from_symbol("SecondRiesz01[theta=1]", second_riesz_symbol(0, 1, 1.0, 2), t2,
                                             burkholder, "(p*-1)|alpha|, alpha=delta_1"));
    cat.push_back(ProbeOperator::from_symbol(
        "R0^2-R1^2",
        cplx(0.5) * (second_riesz_symbol(0, 0, AT_INFINITY, 2) - second_riesz_symbol(1, 1, AT_INFINITY, 2)), t2,
        burkholder, "(p*-1), difference of squares"));
    {
        const MeasureAlpha a2 = MeasureAlpha::dirac(0.0) + MeasureAlpha::dirac(AT_INFINITY);
        const double tv = total_variation(a2);
        cat.push_back(ProbeOperator::from_symbol(
            "StieltjesR2[d0+dinf]*d0d1", phi_symbol(MultiplierSymbol::stieltjes_r2(a2), t2) * mixed(0, 1), t2,
            [tv](double p) { return tv * burkholder(p); }, "(p*-1)|alpha|"));
    }
    cat.push_back(ProbeOperator::from_symbol("BeurlingAhlfors", beurling_ahlfors(2), t2,
                                             [](double p) { return 2.0 * burkholder(p); },
                                             "2(p*-1), real and imaginary parts"));

    if (select.empty()) return cat;
    std::vector<ProbeOperator> out;
    for (const auto& id : select) {
        const auto it = std::find_if(cat.begin(), cat.end(), [&](const ProbeOperator& o) { return o.id == id; });
        if (it == cat.end()) throw DomainError("bound_catalog: unknown operator id '" + id + "'");
        if (std::none_of(out.begin(), out.end(), [&](const ProbeOperator& o) { return o.id == id; }))
            out.push_back(*it);
    }
    return out;
}

std::vector<ProbeReport> verify_bound_suite(const std::vector<double>& ps_in, const ProbeConfig& cfg,
                                            const std::vector<std::string>& select) {
    std::vector<double> ps = ps_in;
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    std::vector<ProbeReport> out;
    for (const auto& op : bound_catalog(select))
        for (double p : ps) out.push_back(probe(op, p, cfg));
    return out;
}

}  // namespace gvmult
