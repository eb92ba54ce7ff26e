#pragma once

// Flat tori T¹ and T² with the uniform grid x_j = 2πj/n.
//
// Fourier coefficients are normalised as c_k = (1/N) Σ_x f(x) e^{−ik·x}, so
// Σ_k |c_k|² = mean_x |f(x)|² and f(x) = Σ_k c_k e^{ik·x}. Coefficient vectors
// share the row-major index (i0·n + i1) of the field and index i ↦ frequency
// i for i < n/2, i − n otherwise (the Nyquist mode is −n/2).

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gvmult/multiplier.hpp"
#include "gvmult/vertical_diffusion.hpp"

namespace gvmult {

using Freq = std::array<int, 2>;

struct TorusGrid {
    int dim = 1;
    int n = 64;

    /// Throws DomainError unless dim ∈ {1,2} and n is a power of two ≥ 8.
    void validate() const;
    double spacing() const;
    Eigen::Index size() const { return dim == 1 ? n : static_cast<Eigen::Index>(n) * n; }
    int frequency(int j) const { return j < n / 2 ? j : j - n; }
    /// Frequency vector of flat index idx (second entry 0 on T¹).
    Freq freq(Eigen::Index idx) const;
    /// Coordinates of flat index idx (second entry 0 on T¹).
    std::array<double, 2> point(Eigen::Index idx) const;
    bool operator==(const TorusGrid& o) const { return dim == o.dim && n == o.n; }
};

struct TorusField {
    TorusGrid grid;
    Eigen::VectorXcd values;

    static TorusField zeros(const TorusGrid& grid);
    static TorusField constant(const TorusGrid& grid, cplx c);
    /// Samples f(x0, x1) at the grid points (x1 = 0 on T¹).
    static TorusField sample(const TorusGrid& grid, const std::function<cplx(double, double)>& f);

    /// Throws DomainError on size mismatch or non-finite values.
    void validate() const;
    cplx mean() const { return values.mean(); }
};

/// (2π)^{dim/p} (mean |f|^p)^{1/p}.
double lp_norm(const TorusField& f, double p);

Eigen::VectorXcd forward_transform(const TorusField& f);
TorusField inverse_transform(const TorusGrid& grid, const Eigen::VectorXcd& coeffs);

/// Handling of the k = 0 mode. Evaluate uses the symbol's own value at 0.
enum class ZeroModePolicy { ZeroOut, Identity, Reject, Evaluate };

class SymbolOperator {
public:
    using Symbol = std::function<cplx(const Freq&)>;

    SymbolOperator(Symbol symbol, ZeroModePolicy policy, std::string name);

    /// Multiplier actually applied at frequency k (policy included). Throws
    /// DomainError for k = 0 under Reject.
    cplx multiplier(const Freq& k) const;
    cplx symbol(const Freq& k) const { return symbol_(k); }
    ZeroModePolicy policy() const { return policy_; }
    const std::string& name() const { return name_; }

    SymbolOperator operator*(const SymbolOperator& rhs) const;
    SymbolOperator operator+(const SymbolOperator& rhs) const;
    SymbolOperator operator-(const SymbolOperator& rhs) const;
    friend SymbolOperator operator*(cplx c, const SymbolOperator& op);

private:
    Symbol symbol_;
    ZeroModePolicy policy_;
    std::string name_;
};

TorusField apply_symbol(const SymbolOperator& op, const TorusField& f);

SymbolOperator identity_symbol();
/// |k|², the symbol of −Δ.
SymbolOperator neg_laplacian_symbol();
/// Σ_d 4 sin²(k_d h/2)/h²: the symbol of the periodic second-difference −Δ_h.
double discrete_laplacian_eigenvalue(const TorusGrid& grid, const Freq& k);

/// i k_i / √(|k|² + θ²).
SymbolOperator riesz_symbol(int axis, double theta, int dim);
/// −k_i k_j / (√(|k|²+θ²)(√(|k|²+θ²) − θ)); θ = AT_INFINITY gives −2 k_i k_j/|k|².
SymbolOperator second_riesz_symbol(int i, int j, double theta, int dim);
/// (i k₁ + k₂)² / |k|² on T².
SymbolOperator beurling_ahlfors(int dim = 2);

/// Φ(|k|²) with Φ tabulated once at every |k|² occurring on `grid`.
SymbolOperator phi_symbol(const MultiplierSymbol& phi, const TorusGrid& grid,
                          ZeroModePolicy policy = ZeroModePolicy::ZeroOut);
/// W: Φ_ext(|k|²) for the vertical diffusion `spec`.
SymbolOperator w_operator(const DiffusionSpec& spec, const TorusGrid& grid);
/// T_i: t_symbol(|k|²)·(i k_i).
SymbolOperator t_operator(const DiffusionSpec& spec, int axis, const TorusGrid& grid);
/// S_ij: s_symbol(|k|²)·k_i k_j (the adjoint of ∂_j is −∂_j).
SymbolOperator s_operator(const DiffusionSpec& spec, int i, int j, const TorusGrid& grid);

/// L = Δ_h + V with the periodic second-difference Laplacian; dense symmetric
/// eigendecomposition computed at construction.
class SchrodingerOperator {
public:
    static constexpr Eigen::Index kMaxPoints = 4096;

    SchrodingerOperator(const TorusGrid& grid, const Eigen::VectorXd& V);

    const TorusGrid& grid() const { return grid_; }
    const Eigen::VectorXd& potential() const { return V_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    /// Nonincreasing.
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

private:
    TorusGrid grid_;
    Eigen::VectorXd V_;
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
};

std::shared_ptr<const SchrodingerOperator> schrodinger_build(const TorusGrid& grid, const TorusField& V);

/// Either the exact Fourier Laplacian (spectrum |k|²) or a Schrödinger operator.
class SpectralBackground {
public:
    static SpectralBackground laplacian(const TorusGrid& grid);
    static SpectralBackground schrodinger(std::shared_ptr<const SchrodingerOperator> op);

    const TorusGrid& grid() const { return grid_; }
    const SchrodingerOperator* op() const { return op_.get(); }

    /// g(−L) f for a spectral function g of λ ≥ 0. Components where g is not
    /// finite are dropped if their coefficient is negligible, else DomainError.
    TorusField apply(const std::function<cplx(double)>& g, const TorusField& f) const;

    /// Spectral coefficients of f: component j has −L-eigenvalue lambdas[j] ≥ 0.
    /// Fourier modes for the Laplacian, eigenvectors for a Schrödinger operator.
    struct Decomposition {
        Eigen::VectorXd lambdas;
        Eigen::VectorXcd coeffs;
    };
    Decomposition decompose(const TorusField& f) const;
    /// Σ_j coeffs[j] e_j.
    TorusField synthesize(const Eigen::VectorXcd& coeffs) const;

private:
    TorusGrid grid_;
    std::shared_ptr<const SchrodingerOperator> op_;
};

TorusField apply_phi_schrodinger(const MultiplierSymbol& phi, const SchrodingerOperator& op, const TorusField& f);
TorusField heat_semigroup(const SchrodingerOperator& op, double t, const TorusField& f);

/// U_f(·, y) = K(y, −L) f for each y in y_grid.
std::vector<TorusField> extension_U(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f,
                                    const std::vector<double>& y_grid);

/// max over interior y nodes and x of |L U_f + B U_f| / ‖f‖₂, with L applied
/// spectrally and B by second-order differences in y. `y_grid` must be uniform
/// with at least 32 interior points.
double stinga_torrea_residual(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f,
                              const std::vector<double>& y_grid);

}  // namespace gvmult
