#include "gvmult/torus_spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "gvmult/errors.hpp"

namespace gvmult {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* op) {
    if (!(a == b)) {
        std::ostringstream os;
        os << op << ": grid mismatch (dim " << a.dim << ", n " << a.n << " vs dim " << b.dim << ", n " << b.n << ")";
        throw DomainError(os.str());
    }
}

int norm2(const Freq& k) { return k[0] * k[0] + k[1] * k[1]; }

// In-place 1D transforms along every line of a row-major n×n (or n) array.
void transform_lines(const TorusGrid& grid, Eigen::VectorXcd& data, bool forward) {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    const int n = grid.n;
    std::vector<cplx> in(n), out(n);
    auto run = [&](Eigen::Index start, Eigen::Index stride) {
        for (int j = 0; j < n; ++j) in[j] = data[start + j * stride];
        if (forward) fft.fwd(out, in);
        else fft.inv(out, in);
        for (int j = 0; j < n; ++j) data[start + j * stride] = out[j];
    };
    if (grid.dim == 1) {
        run(0, 1);
        return;
    }
    for (int r = 0; r < n; ++r) run(static_cast<Eigen::Index>(r) * n, 1);
    for (int c = 0; c < n; ++c) run(c, n);
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid and fields

void TorusGrid::validate() const {
    if (dim != 1 && dim != 2) throw DomainError("TorusGrid: dim must be 1 or 2");
    if (n < 8 || (n & (n - 1)) != 0) {
        std::ostringstream os;
        os << "TorusGrid: n must be a power of two >= 8, got " << n;
        throw DomainError(os.str());
    }
}

double TorusGrid::spacing() const { return kTwoPi / n; }

Freq TorusGrid::freq(Eigen::Index idx) const {
    if (dim == 1) return {frequency(static_cast<int>(idx)), 0};
    return {frequency(static_cast<int>(idx / n)), frequency(static_cast<int>(idx % n))};
}

std::array<double, 2> TorusGrid::point(Eigen::Index idx) const {
    const double h = spacing();
    if (dim == 1) return {h * static_cast<double>(idx), 0.0};
    return {h * static_cast<double>(idx / n), h * static_cast<double>(idx % n)};
}

TorusField TorusField::zeros(const TorusGrid& grid) {
    grid.validate();
    return {grid, Eigen::VectorXcd::Zero(grid.size())};
}

TorusField TorusField::constant(const TorusGrid& grid, cplx c) {
    grid.validate();
    return {grid, Eigen::VectorXcd::Constant(grid.size(), c)};
}

TorusField TorusField::sample(const TorusGrid& grid, const std::function<cplx(double, double)>& f) {
    TorusField out = zeros(grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const auto x = grid.point(i);
        out.values[i] = f(x[0], x[1]);
    }
    return out;
}

void TorusField::validate() const {
    grid.validate();
    if (values.size() != grid.size()) {
        std::ostringstream os;
        os << "TorusField: expected " << grid.size() << " values, got " << values.size();
        throw DomainError(os.str());
    }
    if (!values.allFinite()) throw DomainError("TorusField: values must be finite");
}

double lp_norm(const TorusField& f, double p) {
    if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
    const double mean = f.values.cwiseAbs().array().pow(p).mean();
    return std::pow(std::pow(kTwoPi, f.grid.dim) * mean, 1.0 / p);
}

Eigen::VectorXcd forward_transform(const TorusField& f) {
    f.validate();
    Eigen::VectorXcd c = f.values;
    transform_lines(f.grid, c, true);
    c /= static_cast<double>(f.grid.size());
    return c;
}

TorusField inverse_transform(const TorusGrid& grid, const Eigen::VectorXcd& coeffs) {
    grid.validate();
    if (coeffs.size() != grid.size()) throw DomainError("inverse_transform: coefficient count does not match grid");
    TorusField out{grid, coeffs};
    transform_lines(grid, out.values, false);
    return out;
}

// ---------------------------------------------------------------------------
// Symbol operators

SymbolOperator::SymbolOperator(Symbol symbol, ZeroModePolicy policy, std::string name)
    : symbol_(std::move(symbol)), policy_(policy), name_(std::move(name)) {}

cplx SymbolOperator::multiplier(const Freq& k) const {
    if (k[0] != 0 || k[1] != 0) return symbol_(k);
    switch (policy_) {
        case ZeroModePolicy::ZeroOut: return 0.0;
        case ZeroModePolicy::Identity: return 1.0;
        case ZeroModePolicy::Evaluate: return symbol_(k);
        case ZeroModePolicy::Reject: break;
    }
    throw DomainError(name_ + ": zero mode rejected by policy");
}

namespace {

// Composite operators carry the combined zero-mode multiplier as their symbol
// value at k = 0. A Reject operand propagates.
SymbolOperator combine(const SymbolOperator& a, const SymbolOperator& b, bool product, const std::string& name) {
    const bool reject = a.policy() == ZeroModePolicy::Reject || b.policy() == ZeroModePolicy::Reject;
    auto sym = [a, b, product](const Freq& k) -> cplx {
        const bool zero = k[0] == 0 && k[1] == 0;
        const cplx x = zero ? a.multiplier(k) : a.symbol(k);
        const cplx y = zero ? b.multiplier(k) : b.symbol(k);
        return product ? x * y : x + y;
    };
    return {sym, reject ? ZeroModePolicy::Reject : ZeroModePolicy::Evaluate, name};
}

}  // namespace

SymbolOperator SymbolOperator::operator*(const SymbolOperator& rhs) const {
    return combine(*this, rhs, true, "(" + name_ + ")*(" + rhs.name_ + ")");
}

SymbolOperator SymbolOperator::operator+(const SymbolOperator& rhs) const {
    return combine(*this, rhs, false, "(" + name_ + ")+(" + rhs.name_ + ")");
}

SymbolOperator SymbolOperator::operator-(const SymbolOperator& rhs) const {
    return combine(*this, cplx(-1.0) * rhs, false, "(" + name_ + ")-(" + rhs.name_ + ")");
}

SymbolOperator operator*(cplx c, const SymbolOperator& op) {
    std::ostringstream os;
    os << c << "*(" << op.name() << ")";
    if (op.policy() == ZeroModePolicy::Reject)
        return {[c, op](const Freq& k) { return c * op.symbol(k); }, ZeroModePolicy::Reject, os.str()};
    return {[c, op](const Freq& k) { return c * op.multiplier(k); }, ZeroModePolicy::Evaluate, os.str()};
}

TorusField apply_symbol(const SymbolOperator& op, const TorusField& f) {
    Eigen::VectorXcd c = forward_transform(f);
    const TorusGrid& grid = f.grid;
    if (op.policy() == ZeroModePolicy::Reject && std::abs(c[0]) > 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()))
        throw DomainError(op.name() + ": zero-mode policy Reject requires a zero-mean field");
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const Freq k = grid.freq(i);
        if (i == 0 && op.policy() == ZeroModePolicy::Reject) {
            c[0] = 0.0;
            continue;
        }
        c[i] *= op.multiplier(k);
    }
    return inverse_transform(grid, c);
}

SymbolOperator identity_symbol() {
    return {[](const Freq&) { return cplx(1.0); }, ZeroModePolicy::Identity, "I"};
}

SymbolOperator neg_laplacian_symbol() {
    return {[](const Freq& k) { return cplx(norm2(k)); }, ZeroModePolicy::Evaluate, "-Delta"};
}

double discrete_laplacian_eigenvalue(const TorusGrid& grid, const Freq& k) {
    const double h = grid.spacing();
    double v = 0.0;
    for (int d = 0; d < grid.dim; ++d) {
        const double s = std::sin(0.5 * k[d] * h);
        v += 4.0 * s * s / (h * h);
    }
    return v;
}

namespace {

void require_axis(int axis, int dim, const char* op) {
    if (dim != 1 && dim != 2) throw DomainError(std::string(op) + ": dim must be 1 or 2");
    if (axis < 0 || axis >= dim) {
        std::ostringstream os;
        os << op << ": axis " << axis << " out of range for dim " << dim;
        throw DomainError(os.str());
    }
}

}  // namespace

SymbolOperator riesz_symbol(int axis, double theta, int dim) {
    require_axis(axis, dim, "riesz_symbol");
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("riesz_symbol: theta must be finite and >= 0");
    auto sym = [axis, theta](const Freq& k) {
        const double r = std::sqrt(norm2(k) + theta * theta);
        if (r == 0.0) return cplx(0.0);
        return cplx(0.0, k[axis] / r);
    };
    std::ostringstream os;
    os << "R_" << axis + 1 << "^(" << theta << ")";
    return {sym, theta > 0.0 ? ZeroModePolicy::Evaluate : ZeroModePolicy::ZeroOut, os.str()};
}

SymbolOperator second_riesz_symbol(int i, int j, double theta, int dim) {
    require_axis(i, dim, "second_riesz_symbol");
    require_axis(j, dim, "second_riesz_symbol");
    if (!(theta >= 0.0)) throw DomainError("second_riesz_symbol: theta must be >= 0 or AT_INFINITY");
    std::ostringstream os;
    os << "S_" << i + 1 << j + 1 << "^(" << (std::isinf(theta) ? std::string("inf") : std::to_string(theta)) << ")";
    if (std::isinf(theta)) {
        auto sym = [i, j](const Freq& k) {
            const int q = norm2(k);
            if (q == 0) return cplx(0.0);
            return cplx(-2.0 * k[i] * k[j] / static_cast<double>(q));
        };
        return {sym, ZeroModePolicy::ZeroOut, os.str()};
    }
    // 1/(r(r−θ)) = (r+θ)/(|k|² r) avoids cancellation for θ ≫ |k|.
    auto sym = [i, j, theta](const Freq& k) {
        const int q = norm2(k);
        if (q == 0) return cplx(0.0);
        const double r = std::sqrt(q + theta * theta);
        return cplx(-static_cast<double>(k[i] * k[j]) * (r + theta) / (q * r));
    };
    return {sym, ZeroModePolicy::ZeroOut, os.str()};
}

SymbolOperator beurling_ahlfors(int dim) {
    if (dim != 2) throw DomainError("beurling_ahlfors: only defined on T^2");
    auto sym = [](const Freq& k) {
        const int q = norm2(k);
        if (q == 0) return cplx(0.0);
        const cplx z(k[1], k[0]);  // i k₁ + k₂
        return z * z / static_cast<double>(q);
    };
    return {sym, ZeroModePolicy::ZeroOut, "B"};
}

namespace {

// Φ sampled at every |k|² that occurs on the grid.
std::map<int, cplx> radial_table(const std::function<cplx(double)>& phi, const TorusGrid& grid, bool include_zero) {
    grid.validate();
    std::map<int, cplx> table;
    const int half = grid.n / 2;
    for (int a = 0; a <= half; ++a) {
        for (int b = 0; b <= (grid.dim == 2 ? half : 0); ++b) {
            const int q = a * a + b * b;
            if (q == 0 && !include_zero) continue;
            if (!table.count(q)) table[q] = phi(static_cast<double>(q));
        }
    }
    return table;
}

}  // namespace

SymbolOperator phi_symbol(const MultiplierSymbol& phi, const TorusGrid& grid, ZeroModePolicy policy) {
    const bool with_zero = policy == ZeroModePolicy::Evaluate;
    if (with_zero && !phi.defined_at_zero() && phi.kind() != SymbolKind::ClosedForm)
        throw DomainError(phi.description() + ": symbol is undefined at 0; choose ZeroOut or Identity");
    auto table = std::make_shared<const std::map<int, cplx>>(
        radial_table([&phi](double l) { return phi(l); }, grid, with_zero));
    auto sym = [table](const Freq& k) {
        const auto it = table->find(norm2(k));
        if (it == table->end()) throw DomainError("phi_symbol: frequency outside the tabulated grid");
        return it->second;
    };
    return {sym, policy, phi.description()};
}

SymbolOperator w_operator(const DiffusionSpec& spec, const TorusGrid& grid) {
    return phi_symbol(MultiplierSymbol::closed_form("W[" + spec.describe() + "]",
                                                    [spec](double l) { return cplx(phi_extension(spec, l)); }, 0.5),
                      grid, ZeroModePolicy::ZeroOut);
}

SymbolOperator t_operator(const DiffusionSpec& spec, int axis, const TorusGrid& grid) {
    require_axis(axis, grid.dim, "t_operator");
    auto table = std::make_shared<const std::map<int, cplx>>(
        radial_table([&spec](double l) { return cplx(t_symbol(spec, l)); }, grid, false));
    auto sym = [table, axis](const Freq& k) {
        if (k[axis] == 0) return cplx(0.0);
        return table->at(norm2(k)) * cplx(0.0, k[axis]);
    };
    return {sym, ZeroModePolicy::ZeroOut, "T_" + std::to_string(axis + 1) + "[" + spec.describe() + "]"};
}

SymbolOperator s_operator(const DiffusionSpec& spec, int i, int j, const TorusGrid& grid) {
    require_axis(i, grid.dim, "s_operator");
    require_axis(j, grid.dim, "s_operator");
    auto table = std::make_shared<const std::map<int, cplx>>(
        radial_table([&spec](double l) { return cplx(s_symbol(spec, l)); }, grid, false));
    auto sym = [table, i, j](const Freq& k) {
        if (k[i] == 0 || k[j] == 0) return cplx(0.0);
        return table->at(norm2(k)) * static_cast<double>(k[i] * k[j]);
    };
    return {sym, ZeroModePolicy::ZeroOut,
            "S_" + std::to_string(i + 1) + std::to_string(j + 1) + "[" + spec.describe() + "]"};
}

// ---------------------------------------------------------------------------
// Schrödinger operators

SchrodingerOperator::SchrodingerOperator(const TorusGrid& grid, const Eigen::VectorXd& V) : grid_(grid), V_(V) {
    grid.validate();
    const Eigen::Index N = grid.size();
    if (N > kMaxPoints) {
        std::ostringstream os;
        os << "schrodinger_build: " << N << " grid points exceed the dense eigendecomposition cap " << kMaxPoints;
        throw ResourceError(os.str());
    }
    if (V.size() != N) throw DomainError("schrodinger_build: potential size does not match the grid");
    if (!V.allFinite()) throw DomainError("schrodinger_build: potential must be finite");
    if (V.maxCoeff() > 0.0) {
        std::ostringstream os;
        os << "schrodinger_build: potential must be non-positive, max V = " << V.maxCoeff();
        throw DomainError(os.str());
    }
    const double h2 = grid.spacing() * grid.spacing();
    const int n = grid.n;
    matrix_ = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index idx = 0; idx < N; ++idx) {
        matrix_(idx, idx) += V[idx] - 2.0 * grid.dim / h2;
        if (grid.dim == 1) {
            matrix_(idx, (idx + 1) % n) += 1.0 / h2;
            matrix_(idx, (idx + n - 1) % n) += 1.0 / h2;
        } else {
            const Eigen::Index r = idx / n, c = idx % n;
            matrix_(idx, ((r + 1) % n) * n + c) += 1.0 / h2;
            matrix_(idx, ((r + n - 1) % n) * n + c) += 1.0 / h2;
            matrix_(idx, r * n + (c + 1) % n) += 1.0 / h2;
            matrix_(idx, r * n + (c + n - 1) % n) += 1.0 / h2;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_);
    if (es.info() != Eigen::Success) throw NumericError("schrodinger_build: eigendecomposition failed");
    eigenvalues_ = es.eigenvalues().reverse();
    eigenvectors_ = es.eigenvectors().rowwise().reverse();
}

std::shared_ptr<const SchrodingerOperator> schrodinger_build(const TorusGrid& grid, const TorusField& V) {
    V.validate();
    require_same_grid(grid, V.grid, "schrodinger_build");
    if (V.values.imag().cwiseAbs().maxCoeff() > 0.0) throw DomainError("schrodinger_build: potential must be real");
    return std::make_shared<const SchrodingerOperator>(grid, V.values.real());
}

// ---------------------------------------------------------------------------
// Spectral calculus

SpectralBackground SpectralBackground::laplacian(const TorusGrid& grid) {
    grid.validate();
    SpectralBackground bg;
    bg.grid_ = grid;
    return bg;
}

SpectralBackground SpectralBackground::schrodinger(std::shared_ptr<const SchrodingerOperator> op) {
    if (!op) throw DomainError("SpectralBackground: null operator");
    SpectralBackground bg;
    bg.grid_ = op->grid();
    bg.op_ = std::move(op);
    return bg;
}

SpectralBackground::Decomposition SpectralBackground::decompose(const TorusField& f) const {
    f.validate();
    require_same_grid(grid_, f.grid, "spectral decomposition");
    Decomposition d;
    if (!op_) {
        d.coeffs = forward_transform(f);
        d.lambdas.resize(d.coeffs.size());
        for (Eigen::Index i = 0; i < d.coeffs.size(); ++i) d.lambdas[i] = norm2(grid_.freq(i));
    } else {
        d.coeffs = op_->eigenvectors().transpose().cast<cplx>() * f.values;
        d.lambdas = (-op_->eigenvalues()).cwiseMax(0.0);
    }
    return d;
}

TorusField SpectralBackground::synthesize(const Eigen::VectorXcd& coeffs) const {
    if (!op_) return inverse_transform(grid_, coeffs);
    return {grid_, op_->eigenvectors().cast<cplx>() * coeffs};
}

namespace {

// Eigenvalues of the discrete operator that should be 0 come out at ~1e-13.
constexpr double kZeroEigenvalue = 1e-9;

}  // namespace

TorusField SpectralBackground::apply(const std::function<cplx(double)>& g, const TorusField& f) const {
    auto d = decompose(f);
    const double scale = std::max(d.coeffs.cwiseAbs().maxCoeff(), 1e-300);
    std::map<double, cplx> cache;
    for (Eigen::Index j = 0; j < d.coeffs.size(); ++j) {
        const double l = d.lambdas[j] < kZeroEigenvalue ? 0.0 : d.lambdas[j];
        auto it = cache.find(l);
        if (it == cache.end()) {
            cplx v;
            try {
                v = g(l);
            } catch (const DomainError&) {
                v = cplx(std::numeric_limits<double>::quiet_NaN());
            }
            it = cache.emplace(l, v).first;
        }
        const cplx v = it->second;
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            if (std::abs(d.coeffs[j]) <= 1e-12 * scale) {
                d.coeffs[j] = 0.0;
                continue;
            }
            std::ostringstream os;
            os << "spectral function is not finite at eigenvalue " << l << " where f has coefficient "
               << std::abs(d.coeffs[j]);
            throw DomainError(os.str());
        }
        d.coeffs[j] *= v;
    }
    return synthesize(d.coeffs);
}

TorusField apply_phi_schrodinger(const MultiplierSymbol& phi, const SchrodingerOperator& op, const TorusField& f) {
    const auto bg = SpectralBackground::schrodinger(
        std::shared_ptr<const SchrodingerOperator>(std::shared_ptr<const SchrodingerOperator>(), &op));
    return bg.apply([&phi](double l) { return phi(l); }, f);
}

TorusField heat_semigroup(const SchrodingerOperator& op, double t, const TorusField& f) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("heat_semigroup: t must be finite and >= 0");
    const auto bg = SpectralBackground::schrodinger(
        std::shared_ptr<const SchrodingerOperator>(std::shared_ptr<const SchrodingerOperator>(), &op));
    return bg.apply([t](double l) { return cplx(std::exp(-t * l)); }, f);
}

std::vector<TorusField> extension_U(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f,
                                    const std::vector<double>& y_grid) {
    const auto d = bg.decompose(f);
    std::map<double, std::shared_ptr<KernelProfile>> profiles;
    std::vector<const KernelProfile*> per_component(d.coeffs.size());
    for (Eigen::Index j = 0; j < d.coeffs.size(); ++j) {
        const double l = d.lambdas[j] < kZeroEigenvalue ? 0.0 : d.lambdas[j];
        auto it = profiles.find(l);
        if (it == profiles.end()) it = profiles.emplace(l, std::make_shared<KernelProfile>(spec, l)).first;
        per_component[j] = it->second.get();
    }
    std::vector<TorusField> slices;
    slices.reserve(y_grid.size());
    for (double y : y_grid) {
        if (!(y >= 0.0)) throw DomainError("extension_U: y values must be >= 0");
        Eigen::VectorXcd c = d.coeffs;
        for (Eigen::Index j = 0; j < c.size(); ++j)
            if (c[j] != cplx(0.0)) c[j] *= per_component[j]->value(y);
        slices.push_back(bg.synthesize(c));
    }
    return slices;
}

double stinga_torrea_residual(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f,
                              const std::vector<double>& y_grid) {
    if (y_grid.size() < 34) throw DomainError("stinga_torrea_residual: need at least 32 interior y points");
    const double hy = y_grid[1] - y_grid[0];
    for (std::size_t i = 1; i < y_grid.size(); ++i) {
        if (std::abs((y_grid[i] - y_grid[i - 1]) - hy) > 1e-9 * std::abs(hy) || !(hy > 0.0))
            throw DomainError("stinga_torrea_residual: y grid must be uniform and increasing");
    }
    if (!(y_grid.front() > 0.0)) throw DomainError("stinga_torrea_residual: y grid must lie in (0, inf)");
    const double fnorm = lp_norm(f, 2.0);
    if (fnorm == 0.0) return 0.0;

    const auto u = extension_U(spec, bg, f, y_grid);
    const auto d = bg.decompose(f);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < y_grid.size(); ++i) {
        const double y = y_grid[i];
        Eigen::VectorXcd c(d.coeffs.size());
        const auto slice_coeffs = bg.decompose(u[i]).coeffs;
        for (Eigen::Index j = 0; j < c.size(); ++j) {
            const double l = d.lambdas[j] < kZeroEigenvalue ? 0.0 : d.lambdas[j];
            c[j] = -l * slice_coeffs[j];
        }
        const Eigen::VectorXcd lu = bg.synthesize(c).values;
        const double a = spec.a(y);
        const double b = spec.b(y);
        const Eigen::VectorXcd bu = a * a * (u[i + 1].values - 2.0 * u[i].values + u[i - 1].values) / (hy * hy) +
                                    b * (u[i + 1].values - u[i - 1].values) / (2.0 * hy);
        worst = std::max(worst, (lu + bu).cwiseAbs().maxCoeff());
    }
    return worst / fnorm;
}

}  // namespace gvmult
