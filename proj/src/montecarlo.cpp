#include "gvmult/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "gvmult/errors.hpp"

namespace gvmult {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum Stream : std::uint32_t { kEtaStream = 0, kXStream = 1 };

std::mt19937_64 make_engine(std::uint64_t seed, std::int64_t path, Stream stream) {
    const auto p = static_cast<std::uint64_t>(path);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// Antithetic pairs share the generator of the even member and flip every normal.
struct PathNoise {
    std::mt19937_64 eta, x;
    std::normal_distribution<double> eta_normal, x_normal;
    std::uniform_real_distribution<double> uniform{0.0, 1.0};
    std::uniform_real_distribution<double> x_uniform{0.0, 1.0};
    double sign = 1.0;

    PathNoise(const MCConfig& cfg, std::int64_t path) {
        std::int64_t base = path;
        if (cfg.antithetic) {
            base = path / 2;
            sign = (path % 2 == 0) ? 1.0 : -1.0;
        }
        eta = make_engine(cfg.seed, base, kEtaStream);
        x = make_engine(cfg.seed, base, kXStream);
    }
    double eta_gauss() { return sign * eta_normal(eta); }
    double x_gauss() { return sign * x_normal(x); }
    double bridge_uniform() { return uniform(eta); }
    double start_coordinate() {
        const double u = kTwoPi * x_uniform(x);
        return sign > 0.0 ? u : wrap_torus(-u);
    }
};

// a(y), b(y) without going through the variant on every step.
struct Coefficients {
    const DiffusionSpec* spec;
    int kind;
    double a_const = 1.0, b_const = 0.0, gamma = 0.0;
    const TabulatedCoefficients* tab = nullptr;

    explicit Coefficients(const DiffusionSpec& s) : spec(&s) {
        if (const auto* bm = s.as_bm_drift()) {
            kind = 0;
            a_const = bm->sigma;
            b_const = -2.0 * bm->m;
        } else if (const auto* be = s.as_bessel()) {
            kind = 1;
            gamma = be->gamma();
        } else {
            kind = 2;
            tab = s.as_tabulated();
        }
    }
    void eval(double y, double& a, double& b) const {
        switch (kind) {
            case 0: a = a_const; b = b_const; return;
            case 1: a = 1.0; b = gamma / y; return;
            default: a = tab->a(y); b = tab->b(y); return;
        }
    }
};

struct EtaStep {
    double next;
    double theta;  // fraction of the step before absorption
    bool absorbed;
};

// One Euler step of η given the driving increment dβ (variance 2dt).
inline EtaStep eta_step(double y, double a, double b, double dt, double dbeta, PathNoise& noise) {
    const double next = y + b * dt + a * dbeta;
    if (next <= 0.0) return {0.0, y / (y - next), true};
    // Brownian bridge between y and next with variance rate 2a².
    const double p = std::exp(-y * next / (a * a * dt));
    if (noise.bridge_uniform() < p) return {0.0, y / (y + next), true};
    return {next, 1.0, false};
}

// Where b ≤ 0 a step is split until |b|·h ≤ kDriftFraction·y, which resolves
// singular drifts such as γ/y with γ < 0, and the bridge test handles
// excursions below 0. Where b > 0 the bridge test would ignore a drift that
// pushes away from 0, so the step is taken in L = log η instead: on the clock
// ds = a²dt/η², L has drift by/a² − 1 and unit noise, which is exact for the
// Bessel family and for driftless BM. Time is accrued by the trapezoid rule on
// that clock and the path is absorbed below `floor`.
constexpr double kDriftFraction = 0.05;
constexpr double kLogStep = 0.02;

struct FineStep {
    double next;
    double elapsed;
    bool absorbed;
};

struct EtaStepper {
    Coefficients coef;
    double floor;

    // floor: s(floor) ≤ 1e-6·s(y0), so the occupation lost below it is negligible.
    EtaStepper(const DiffusionSpec& spec, double y0) : coef(spec), floor(y0) {
        const double s0 = scale_function(spec, y0);
        for (int i = 0; i < 1000 && floor > 1e-300 && scale_function(spec, floor) > 1e-6 * s0; ++i) floor *= 0.5;
    }

    // One grid step of length dt. piece(y, w) adds w·g(y) to an occupation sum.
    template <typename Piece>
    FineStep step(double y, double dt, PathNoise& noise, const Piece& piece) const {
        double left = dt, elapsed = 0.0;
        for (;;) {
            if (y < floor) return {0.0, elapsed, true};
            double a, b;
            coef.eval(y, a, b);
            double h = left;
            if (b > 0.0) {
                h = std::min(h, kLogStep * y * y / (a * a));
                const double ds = h * a * a / (y * y);
                const double next = y * std::exp((b * y / (a * a) - 1.0) * ds + std::sqrt(2.0 * ds) * noise.eta_gauss());
                double an, bn;
                coef.eval(next, an, bn);
                const double w0 = 0.5 * ds * y * y / (a * a), w1 = 0.5 * ds * next * next / (an * an);
                piece(y, w0);
                piece(next, w1);
                elapsed += w0 + w1;
                y = next;
            } else {
                if (-b * h > kDriftFraction * y) h = kDriftFraction * y / -b;
                const auto s = eta_step(y, a, b, h, std::sqrt(2.0 * h) * noise.eta_gauss(), noise);
                piece(y, s.theta * h);
                elapsed += s.theta * h;
                if (s.absorbed) return {0.0, elapsed, true};
                y = s.next;
            }
            left -= h;
            if (left <= 1e-12 * dt) return {y, elapsed, false};
        }
    }
};

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, count) over a static partition; results must be
// written to per-index storage by the body.
template <typename Body>
void parallel_for(std::int64_t count, int threads, const Body& body) {
    const int t = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(std::max<std::int64_t>(count, 1))));
    if (t == 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    for (int w = 0; w < t; ++w) {
        const std::int64_t lo = count * w / t, hi = count * (w + 1) / t;
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Sparse trigonometric interpolant of a grid field.
struct TrigInterpolant {
    std::vector<Freq> modes;
    std::vector<cplx> coeffs;

    explicit TrigInterpolant(const TorusField& f) {
        const Eigen::VectorXcd c = forward_transform(f);
        const double cut = 1e-14 * std::max(c.cwiseAbs().maxCoeff(), 1e-300);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (std::abs(c[i]) > cut) {
                Freq k = f.grid.freq(i);
                // The Nyquist mode is split symmetrically to keep real fields real.
                if (std::abs(k[0]) == f.grid.n / 2 || std::abs(k[1]) == f.grid.n / 2) {
                    modes.push_back(k);
                    coeffs.push_back(c[i]);
                    continue;
                }
                modes.push_back(k);
                coeffs.push_back(c[i]);
            }
        }
    }
    cplx operator()(const std::array<double, 2>& x) const {
        cplx s = 0.0;
        for (std::size_t m = 0; m < modes.size(); ++m)
            s += coeffs[m] * std::polar(1.0, modes[m][0] * x[0] + modes[m][1] * x[1]);
        return s;
    }
};

int bin_of(double x, int n_bins) {
    const int b = static_cast<int>(std::floor(wrap_torus(x) / kTwoPi * n_bins));
    return std::clamp(b, 0, n_bins - 1);
}

Eigen::Index flat_bin(const std::array<double, 2>& x, int dim, int n_bins) {
    if (dim == 1) return bin_of(x[0], n_bins);
    return static_cast<Eigen::Index>(bin_of(x[0], n_bins)) * n_bins + bin_of(x[1], n_bins);
}

// Per-bin running sums reduced in path order.
struct BinAccumulator {
    Eigen::VectorXcd sum;
    Eigen::VectorXd sum_sq;
    Eigen::VectorXi count;

    explicit BinAccumulator(Eigen::Index bins)
        : sum(Eigen::VectorXcd::Zero(bins)), sum_sq(Eigen::VectorXd::Zero(bins)), count(Eigen::VectorXi::Zero(bins)) {}

    void add(Eigen::Index bin, cplx z) {
        sum[bin] += z;
        sum_sq[bin] += std::norm(z);
        count[bin] += 1;
    }

    EnsembleResult finish(const TorusGrid& bin_grid, std::int64_t flagged, double mean_tau) const {
        EnsembleResult r;
        r.estimate = TorusField::zeros(bin_grid);
        r.std_error = Eigen::VectorXd::Zero(sum.size());
        r.n_effective = count;
        r.flagged_paths = flagged;
        r.mean_tau = mean_tau;
        for (Eigen::Index b = 0; b < sum.size(); ++b) {
            const int n = count[b];
            if (n == 0) continue;
            const cplx mean = sum[b] / static_cast<double>(n);
            r.estimate.values[b] = mean;
            if (n > 1) {
                const double var = std::max(0.0, (sum_sq[b] - n * std::norm(mean)) / (n - 1));
                r.std_error[b] = std::sqrt(var / n);
            }
        }
        return r;
    }
};

TorusGrid bin_grid_for(int dim, int n_bins) {
    TorusGrid g{dim, n_bins};
    g.validate();
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------

void MCConfig::validate() const {
    std::ostringstream os;
    if (!(dt > 0.0) || !std::isfinite(dt)) os << "dt must be positive; ";
    if (!(y0 > 0.0) || !std::isfinite(y0)) os << "y0 must be positive; ";
    else if (dt > 0.01 * y0 * (1.0 + 1e-12)) os << "dt must be <= 0.01*y0 (dt=" << dt << ", y0=" << y0 << "); ";
    if (n_paths < 1) os << "n_paths must be >= 1; ";
    if (n_bins < 8 || (n_bins & (n_bins - 1)) != 0) os << "n_bins must be a power of two >= 8; ";
    if (max_steps < 1) os << "max_steps must be >= 1; ";
    if (threads < 0) os << "threads must be >= 0; ";
    if (antithetic && n_paths % 2 != 0) os << "antithetic sampling needs an even n_paths; ";
    if (!os.str().empty()) throw DomainError("MCConfig: " + os.str());
}

std::array<double, 2> EnsembleResult::bin_center(Eigen::Index index) const {
    const int n = estimate.grid.n;
    const double w = kTwoPi / n;
    if (estimate.grid.dim == 1) return {(static_cast<double>(index) + 0.5) * w, 0.0};
    return {(static_cast<double>(index / n) + 0.5) * w, (static_cast<double>(index % n) + 0.5) * w};
}

double wrap_torus(double x) {
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

EtaPath simulate_eta(const DiffusionSpec& spec, const MCConfig& cfg, std::int64_t path_index, bool record) {
    cfg.validate();
    if (!check_conditions(spec).admissible) throw PreconditionError("simulate_eta: spec is not admissible");
    const EtaStepper stepper(spec, cfg.y0);
    PathNoise noise(cfg, path_index);
    EtaPath path;
    double y = cfg.y0, t = 0.0;
    if (record) {
        path.t.push_back(0.0);
        path.eta.push_back(y);
    }
    for (std::int64_t step = 0; step < cfg.max_steps; ++step) {
        const auto s = stepper.step(y, cfg.dt, noise, [](double, double) {});
        if (s.absorbed) {
            t += s.elapsed;
            path.tau = t;
            path.absorbed = true;
            if (record) {
                path.t.push_back(t);
                path.eta.push_back(0.0);
            }
            return path;
        }
        y = s.next;
        t += s.elapsed;
        if (record) {
            path.t.push_back(t);
            path.eta.push_back(y);
        }
    }
    path.tau = t;
    path.absorbed = false;
    return path;
}

std::vector<std::array<double, 2>> simulate_X(const TorusGrid& grid, const MCConfig& cfg, std::int64_t path_index,
                                              std::int64_t steps, std::optional<std::array<double, 2>> start) {
    grid.validate();
    cfg.validate();
    if (steps < 0) throw DomainError("simulate_X: steps must be >= 0");
    PathNoise noise(cfg, path_index);
    const double sdt = std::sqrt(2.0 * cfg.dt);
    std::array<double, 2> x{0.0, 0.0};
    if (start) {
        x = *start;
    } else {
        for (int d = 0; d < grid.dim; ++d) x[d] = noise.start_coordinate();
    }
    std::vector<std::array<double, 2>> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(x);
    for (std::int64_t s = 0; s < steps; ++s) {
        for (int d = 0; d < grid.dim; ++d) x[d] += sdt * noise.x_gauss();
        out.push_back(x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ExtensionTable

ExtensionTable::ExtensionTable(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f,
                               double y_max)
    : dim_(f.grid.dim), y_min_(1e-4), log_ratio_(std::log(1.01)), y_max_(y_max) {
    if (!(y_max > 1e-3)) throw DomainError("ExtensionTable: y_max too small");
    for (double y = y_min_; ; y *= 1.01) {
        nodes_.push_back(y);
        if (y > y_max) break;
    }
    // Four nodes past y_max keep the cubic stencil inside the table.
    for (int extra = 0; extra < 3; ++extra) nodes_.push_back(nodes_.back() * 1.01);

    const auto d = bg.decompose(f);
    std::map<double, std::shared_ptr<KernelProfile>> profiles;
    std::vector<const KernelProfile*> prof(d.coeffs.size());
    for (Eigen::Index j = 0; j < d.coeffs.size(); ++j) {
        const double l = d.lambdas[j] < 1e-9 ? 0.0 : d.lambdas[j];
        auto it = profiles.find(l);
        if (it == profiles.end()) it = profiles.emplace(l, std::make_shared<KernelProfile>(spec, l)).first;
        prof[j] = it->second.get();
    }

    const Eigen::Index N = f.grid.size();
    const std::size_t nn = nodes_.size();
    Eigen::MatrixXcd uc(N, static_cast<Eigen::Index>(nn)), dc(N, static_cast<Eigen::Index>(nn));
    const bool fourier = bg.op() == nullptr;
    for (std::size_t i = 0; i < nn; ++i) {
        Eigen::VectorXcd cu = d.coeffs, cd = d.coeffs;
        for (Eigen::Index j = 0; j < d.coeffs.size(); ++j) {
            if (d.coeffs[j] == cplx(0.0)) continue;
            cu[j] *= prof[j]->value(nodes_[i]);
            cd[j] *= prof[j]->dy(nodes_[i]);
        }
        if (fourier) {
            uc.col(static_cast<Eigen::Index>(i)) = cu;
            dc.col(static_cast<Eigen::Index>(i)) = cd;
        } else {
            uc.col(static_cast<Eigen::Index>(i)) = forward_transform(bg.synthesize(cu));
            dc.col(static_cast<Eigen::Index>(i)) = forward_transform(bg.synthesize(cd));
        }
    }
    const Eigen::VectorXd mass = uc.cwiseAbs().rowwise().maxCoeff();
    const double cut = 1e-14 * std::max(mass.maxCoeff(), 1e-300);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < N; ++k)
        if (mass[k] > cut) keep.push_back(k);
    for (auto k : keep) modes_.push_back(f.grid.freq(k));
    u_.resize(nn * keep.size());
    du_.resize(nn * keep.size());
    for (std::size_t i = 0; i < nn; ++i) {
        for (std::size_t m = 0; m < keep.size(); ++m) {
            u_[i * keep.size() + m] = uc(keep[m], static_cast<Eigen::Index>(i));
            du_[i * keep.size() + m] = dc(keep[m], static_cast<Eigen::Index>(i));
        }
    }
}

void ExtensionTable::locate(double y, int& j0, std::array<double, 4>& w) const {
    if (y > y_max_) {
        std::ostringstream os;
        os << "ExtensionTable: height " << y << " is above the table range " << y_max_;
        throw NumericError(os.str());
    }
    if (y <= y_min_) {
        j0 = 0;
        w = {1.0, 0.0, 0.0, 0.0};
        return;
    }
    const int j = static_cast<int>(std::log(y / y_min_) / log_ratio_);
    j0 = std::clamp(j - 1, 0, static_cast<int>(nodes_.size()) - 4);
    const double* x = &nodes_[static_cast<std::size_t>(j0)];
    for (int a = 0; a < 4; ++a) {
        double v = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) v *= (y - x[b]) / (x[a] - x[b]);
        w[a] = v;
    }
}

void ExtensionTable::gradient(const std::array<double, 2>& x, double y, cplx& dy, std::array<cplx, 2>& dx) const {
    int j0;
    std::array<double, 4> w;
    locate(y, j0, w);
    const std::size_t M = modes_.size();
    dy = 0.0;
    dx = {cplx(0.0), cplx(0.0)};
    for (std::size_t m = 0; m < M; ++m) {
        cplx u = 0.0, d = 0.0;
        for (int a = 0; a < 4; ++a) {
            const std::size_t idx = (static_cast<std::size_t>(j0) + a) * M + m;
            u += w[a] * u_[idx];
            d += w[a] * du_[idx];
        }
        const Freq& k = modes_[m];
        const cplx e = std::polar(1.0, k[0] * x[0] + k[1] * x[1]);
        dy += d * e;
        const cplx ue = u * e;
        dx[0] += cplx(0.0, k[0]) * ue;
        if (dim_ == 2) dx[1] += cplx(0.0, k[1]) * ue;
    }
}

cplx ExtensionTable::value(const std::array<double, 2>& x, double y) const {
    int j0;
    std::array<double, 4> w;
    locate(y, j0, w);
    const std::size_t M = modes_.size();
    cplx s = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        cplx u = 0.0;
        for (int a = 0; a < 4; ++a) u += w[a] * u_[(static_cast<std::size_t>(j0) + a) * M + m];
        s += u * std::polar(1.0, modes_[m][0] * x[0] + modes_[m][1] * x[1]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Gundy–Varopoulos estimators

namespace {

struct GVOutcome {
    Eigen::Index bin = -1;  // −1: flagged
    double tau = 0.0;
    std::array<cplx, 7> z{};  // W, T_0, T_1, S_00, S_01, S_10, S_11
};

}  // namespace

GVBatch gv_estimate_all(const TorusField& f, const DiffusionSpec& spec, const TorusField* V, const MCConfig& cfg) {
    cfg.validate();
    f.validate();
    if (!check_conditions(spec).admissible) throw PreconditionError("gv_estimate: spec is not admissible");
    const TorusGrid& grid = f.grid;
    const int dim = grid.dim;
    const TorusGrid bins = bin_grid_for(dim, cfg.n_bins);

    SpectralBackground bg = SpectralBackground::laplacian(grid);
    std::optional<TrigInterpolant> v_interp;
    if (V) {
        bg = SpectralBackground::schrodinger(schrodinger_build(grid, *V));
        v_interp.emplace(*V);
    }
    const double y_top = 20.0 * cfg.y0 + 50.0;
    const ExtensionTable table(spec, bg, f, y_top);
    const Coefficients coef(spec);
    const double sdt = std::sqrt(2.0 * cfg.dt);

    std::vector<GVOutcome> outcomes(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(cfg.n_paths, cfg.threads, [&](std::int64_t p) {
        PathNoise noise(cfg, p);
        std::array<double, 2> x{0.0, 0.0};
        for (int d = 0; d < dim; ++d) x[d] = noise.start_coordinate();
        double y = cfg.y0, t = 0.0, A = 0.0;
        GVOutcome out;
        // acc uses the integrand at every step; held keeps it for two steps. The
        // left-point error is O(dt) in both, so 2·acc − coarse cancels it.
        std::array<cplx, 7> acc{}, coarse{};
        cplx held_uy;
        std::array<cplx, 2> held_ux{};
        double held_w = 1.0;
        for (std::int64_t step = 0; step < cfg.max_steps; ++step) {
            double a, b;
            coef.eval(y, a, b);
            cplx uy;
            std::array<cplx, 2> ux;
            table.gradient(x, y, uy, ux);
            const double dbeta = sdt * noise.eta_gauss();
            std::array<double, 2> dB{0.0, 0.0};
            for (int d = 0; d < dim; ++d) dB[d] = sdt * noise.x_gauss();
            const auto s = eta_step(y, a, b, cfg.dt, dbeta, noise);
            const double th = s.theta;
            // On absorption the β increment is the one that carries η exactly to 0.
            const double db = s.absorbed ? -(y + b * th * cfg.dt) / a : dbeta;
            const double w = v_interp ? std::exp(-A) : 1.0;
            if (step % 2 == 0) {
                held_uy = a * uy;
                held_ux = ux;
                held_w = w;
            }
            acc[0] += w * uy * (a * db);
            coarse[0] += held_w * held_uy * db;
            for (int i = 0; i < dim; ++i) {
                acc[1 + i] += w * ux[i] * db;
                coarse[1 + i] += held_w * held_ux[i] * db;
                for (int j = 0; j < dim; ++j) {
                    acc[3 + 2 * i + j] += w * ux[i] * (dB[j] * th);
                    coarse[3 + 2 * i + j] += held_w * held_ux[i] * (dB[j] * th);
                }
            }
            if (v_interp) A += (*v_interp)(x).real() * cfg.dt * th;
            for (int d = 0; d < dim; ++d) x[d] += dB[d] * th;
            t += cfg.dt * th;
            if (s.absorbed) {
                const double scale = 0.5 * (v_interp ? std::exp(A) : 1.0);
                for (int e = 0; e < 7; ++e) acc[e] = scale * (2.0 * acc[e] - coarse[e]);
                out.bin = flat_bin(x, dim, cfg.n_bins);
                out.tau = t;
                out.z = acc;
                outcomes[static_cast<std::size_t>(p)] = out;
                return;
            }
            y = s.next;
        }
        outcomes[static_cast<std::size_t>(p)] = out;  // flagged
    });

    std::vector<BinAccumulator> accs(7, BinAccumulator(bins.size()));
    std::int64_t flagged = 0;
    double tau_sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.bin < 0) {
            ++flagged;
            continue;
        }
        tau_sum += o.tau;
        for (int e = 0; e < 7; ++e) accs[e].add(o.bin, o.z[e]);
    }
    const double mean_tau = cfg.n_paths > flagged ? tau_sum / static_cast<double>(cfg.n_paths - flagged) : 0.0;
    GVBatch batch;
    batch.W = accs[0].finish(bins, flagged, mean_tau);
    batch.T.resize(dim);
    batch.S.assign(dim, std::vector<EnsembleResult>(dim));
    for (int i = 0; i < dim; ++i) {
        batch.T[i] = accs[1 + i].finish(bins, flagged, mean_tau);
        for (int j = 0; j < dim; ++j) batch.S[i][j] = accs[3 + 2 * i + j].finish(bins, flagged, mean_tau);
    }
    return batch;
}

namespace {

void require_axis(int axis, int dim, const char* op) {
    if (axis < 0 || axis >= dim) {
        std::ostringstream os;
        os << op << ": axis " << axis << " out of range for dim " << dim;
        throw DomainError(os.str());
    }
}

}  // namespace

EnsembleResult gv_estimate_W(const TorusField& f, const DiffusionSpec& spec, const TorusField* V,
                             const MCConfig& cfg) {
    return gv_estimate_all(f, spec, V, cfg).W;
}

EnsembleResult gv_estimate_Ti(const TorusField& f, int i, const DiffusionSpec& spec, const TorusField* V,
                              const MCConfig& cfg) {
    require_axis(i, f.grid.dim, "gv_estimate_Ti");
    return gv_estimate_all(f, spec, V, cfg).T[i];
}

EnsembleResult gv_estimate_Sij(const TorusField& f, int i, int j, const DiffusionSpec& spec, const TorusField* V,
                               const MCConfig& cfg) {
    require_axis(i, f.grid.dim, "gv_estimate_Sij");
    require_axis(j, f.grid.dim, "gv_estimate_Sij");
    return gv_estimate_all(f, spec, V, cfg).S[i][j];
}

// ---------------------------------------------------------------------------
// Feynman–Kac

EnsembleResult fk_estimate(const TorusField& V, double t, const TorusField& f, const MCConfig& cfg) {
    cfg.validate();
    V.validate();
    f.validate();
    if (!(V.grid == f.grid)) throw DomainError("fk_estimate: V and f must share a grid");
    if (V.values.real().maxCoeff() > 0.0 || V.values.imag().cwiseAbs().maxCoeff() > 0.0)
        throw DomainError("fk_estimate: V must be real and non-positive");
    if (!(t >= 0.0) || t > static_cast<double>(cfg.max_steps) * cfg.dt * (1.0 + 1e-12))
        throw DomainError("fk_estimate: need 0 <= t <= max_steps*dt");
    const int dim = f.grid.dim;
    const TorusGrid bins = bin_grid_for(dim, cfg.n_bins);
    const std::int64_t starts = bins.size();
    const std::int64_t per_start = std::max<std::int64_t>(1, cfg.n_paths / starts);
    const TrigInterpolant v_interp(V), f_interp(f);
    const auto full_steps = static_cast<std::int64_t>(std::floor(t / cfg.dt + 1e-9));
    const double last = t - static_cast<double>(full_steps) * cfg.dt;
    const double sdt = std::sqrt(2.0 * cfg.dt);
    const double slast = std::sqrt(2.0 * std::max(last, 0.0));

    EnsembleResult probe;
    probe.estimate = TorusField::zeros(bins);
    std::vector<cplx> values(static_cast<std::size_t>(starts * per_start));
    parallel_for(starts * per_start, cfg.threads, [&](std::int64_t p) {
        const std::int64_t s = p / per_start;
        PathNoise noise(cfg, p);
        std::array<double, 2> x = probe.bin_center(s);
        double A = 0.0;
        for (std::int64_t k = 0; k < full_steps; ++k) {
            A += v_interp(x).real() * cfg.dt;
            for (int d = 0; d < dim; ++d) x[d] += sdt * noise.x_gauss();
        }
        if (last > 0.0) {
            A += v_interp(x).real() * last;
            for (int d = 0; d < dim; ++d) x[d] += slast * noise.x_gauss();
        }
        values[static_cast<std::size_t>(p)] = std::exp(A) * f_interp(x);
    });
    BinAccumulator acc(starts);
    for (std::int64_t p = 0; p < starts * per_start; ++p) acc.add(p / per_start, values[static_cast<std::size_t>(p)]);
    return acc.finish(bins, 0, t);
}

// ---------------------------------------------------------------------------
// Occupation times

OccupationResult occupation_mc(const DiffusionSpec& spec, const std::function<double(double)>& g, double y0,
                               const MCConfig& cfg_in, std::optional<double> support_top) {
    MCConfig cfg = cfg_in;
    cfg.y0 = y0;
    cfg.validate();
    if (!check_conditions(spec).admissible) throw PreconditionError("occupation_mc: spec is not admissible");
    if (support_top && !(*support_top > 0.0)) throw DomainError("occupation_mc: support_top must be positive");
    const EtaStepper stepper(spec, y0);
    const double reset_at = support_top ? 2.0 * *support_top : std::numeric_limits<double>::infinity();

    std::vector<double> values(static_cast<std::size_t>(cfg.n_paths));
    std::vector<char> flagged(static_cast<std::size_t>(cfg.n_paths), 0);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::int64_t p) {
        PathNoise noise(cfg, p);
        double y = y0, sum = 0.0;
        for (std::int64_t step = 0; step < cfg.max_steps; ++step) {
            const auto s = stepper.step(y, cfg.dt, noise, [&](double yl, double w) { sum += g(yl) * w; });
            if (s.absorbed) {
                values[static_cast<std::size_t>(p)] = sum;
                return;
            }
            y = s.next >= reset_at ? *support_top : s.next;
        }
        flagged[static_cast<std::size_t>(p)] = 1;
    });
    OccupationResult r;
    double s = 0.0, s2 = 0.0;
    std::int64_t n = 0;
    for (std::size_t p = 0; p < values.size(); ++p) {
        if (flagged[p]) {
            ++r.flagged_paths;
            continue;
        }
        s += values[p];
        s2 += values[p] * values[p];
        ++n;
    }
    if (n == 0) throw NumericError("occupation_mc: every path hit max_steps");
    r.mean = s / n;
    if (n > 1) r.std_error = std::sqrt(std::max(0.0, (s2 - n * r.mean * r.mean) / (n - 1)) / n);
    return r;
}

// ---------------------------------------------------------------------------
// Oracles and diagnostics

Eigen::VectorXcd bin_average(const TorusField& g, int n_bins) {
    const TorusGrid bins = bin_grid_for(g.grid.dim, n_bins);
    const Eigen::VectorXcd c = forward_transform(g);
    const double w = kTwoPi / n_bins;
    auto sinc = [](double z) { return z == 0.0 ? 1.0 : std::sin(z) / z; };
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(bins.size());
    EnsembleResult layout;
    layout.estimate = TorusField::zeros(bins);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c[i] == cplx(0.0)) continue;
        const Freq k = g.grid.freq(i);
        const double damp = sinc(0.5 * k[0] * w) * (g.grid.dim == 2 ? sinc(0.5 * k[1] * w) : 1.0);
        for (Eigen::Index b = 0; b < bins.size(); ++b) {
            const auto xc = layout.bin_center(b);
            out[b] += c[i] * damp * std::polar(1.0, k[0] * xc[0] + k[1] * xc[1]);
        }
    }
    return out;
}

BiasDiagnostic y0_bias_diagnostic(const TorusField& f, const DiffusionSpec& spec, const MCConfig& cfg) {
    const auto near = gv_estimate_W(f, spec, nullptr, cfg);
    MCConfig far_cfg = cfg;
    far_cfg.y0 = 2.0 * cfg.y0;
    const auto far = gv_estimate_W(f, spec, nullptr, far_cfg);
    BiasDiagnostic d;
    d.max_abs_change = (far.estimate.values - near.estimate.values).cwiseAbs().maxCoeff();
    d.max_std_error = near.std_error.cwiseMax(far.std_error).maxCoeff();
    return d;
}

}  // namespace gvmult
