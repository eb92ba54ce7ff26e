#pragma once

// Path simulation of (X_t, η_t) on T^d × (0, ∞) and Monte Carlo estimators.
//
// Both X (generator Δ) and η (generator a²∂² + b∂) are driven by Brownian
// motions with E(β_t²) = 2t, i.e. increments N(0, 2dt). Every path draws its
// randomness from generators seeded by (seed, path index, stream) only, and
// per-path results are reduced in path order, so outputs do not depend on the
// number of threads.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gvmult/torus_spectral.hpp"
#include "gvmult/vertical_diffusion.hpp"

namespace gvmult {

struct MCConfig {
    double dt = 1e-3;
    std::int64_t n_paths = 10000;
    double y0 = 6.0;
    std::uint64_t seed = 1;
    int n_bins = 32;
    std::int64_t max_steps = 10'000'000;
    int threads = 1;  ///< 0 = hardware concurrency
    bool antithetic = false;

    /// Throws DomainError unless dt ≤ 0.01·y0 and all counts are positive.
    void validate() const;
};

struct EnsembleResult {
    TorusField estimate;  ///< bin grid: dim × n_bins
    Eigen::VectorXd std_error;
    Eigen::VectorXi n_effective;
    std::int64_t flagged_paths = 0;  ///< hit max_steps, excluded
    double mean_tau = 0.0;

    int n_bins() const { return estimate.grid.n; }
    /// Centre of bin `index` (flat, row-major).
    std::array<double, 2> bin_center(Eigen::Index index) const;
    /// Bins with n_effective = 0 carry estimate 0 and std_error 0 and are flagged here.
    bool empty_bin(Eigen::Index index) const { return n_effective[index] == 0; }
};

struct EtaPath {
    std::vector<double> t;
    std::vector<double> eta;
    double tau = 0.0;
    bool absorbed = false;
};

/// Euler–Maruyama for dη = b dt + a dβ from cfg.y0, absorbed at 0. The
/// crossing time is linearly interpolated; a Brownian-bridge test also
/// catches excursions below 0 between grid times.
EtaPath simulate_eta(const DiffusionSpec& spec, const MCConfig& cfg, std::int64_t path_index, bool record = true);

/// Unwrapped coordinates X_0, …, X_{steps} (wrap with wrap_torus). X_0 is
/// uniform unless `start` is given.
std::vector<std::array<double, 2>> simulate_X(const TorusGrid& grid, const MCConfig& cfg, std::int64_t path_index,
                                              std::int64_t steps,
                                              std::optional<std::array<double, 2>> start = std::nullopt);

double wrap_torus(double x);

/// Fourier coefficients of U_f(·, y) and ∂_yU_f(·, y) on a geometric y grid,
/// for the few modes where f has mass. Evaluation is exact in x and cubic in y.
class ExtensionTable {
public:
    ExtensionTable(const DiffusionSpec& spec, const SpectralBackground& bg, const TorusField& f, double y_max);

    /// ∂_yU and ∂_{x_i}U at (x, y). Throws NumericError above y_max.
    void gradient(const std::array<double, 2>& x, double y, cplx& dy, std::array<cplx, 2>& dx) const;
    cplx value(const std::array<double, 2>& x, double y) const;

    std::size_t mode_count() const { return modes_.size(); }
    double y_max() const { return y_max_; }

private:
    void locate(double y, int& j0, std::array<double, 4>& w) const;

    int dim_;
    double y_min_, log_ratio_, y_max_;
    std::vector<double> nodes_;
    std::vector<Freq> modes_;
    std::vector<cplx> u_;   // node-major: u_[node * modes + m]
    std::vector<cplx> du_;  // ∂_y
};

struct GVBatch {
    EnsembleResult W;
    std::vector<EnsembleResult> T;               ///< T[i]
    std::vector<std::vector<EnsembleResult>> S;  ///< S[i][j]
};

/// One pass over the paths producing the W, T_i and S_ij estimates together.
/// V (optional, ≤ 0) switches to L = Δ_h + V and Feynman–Kac weights.
GVBatch gv_estimate_all(const TorusField& f, const DiffusionSpec& spec, const TorusField* V, const MCConfig& cfg);

EnsembleResult gv_estimate_W(const TorusField& f, const DiffusionSpec& spec, const TorusField* V,
                             const MCConfig& cfg);
EnsembleResult gv_estimate_Ti(const TorusField& f, int i, const DiffusionSpec& spec, const TorusField* V,
                              const MCConfig& cfg);
EnsembleResult gv_estimate_Sij(const TorusField& f, int i, int j, const DiffusionSpec& spec, const TorusField* V,
                               const MCConfig& cfg);

/// Estimate of e^{t(Δ+V)} f started from every bin centre, n_paths/n_bins^dim paths each.
EnsembleResult fk_estimate(const TorusField& V, double t, const TorusField& f, const MCConfig& cfg);

struct OccupationResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t flagged_paths = 0;
};

/// E^{y0}[∫₀^τ g(η_s) ds]. If g vanishes above `support_top`, a path reaching
/// 2·support_top is restarted at support_top: for an admissible spec it returns
/// there almost surely and accrues nothing on the way.
OccupationResult occupation_mc(const DiffusionSpec& spec, const std::function<double(double)>& g, double y0,
                               const MCConfig& cfg, std::optional<double> support_top = std::nullopt);

/// Exact average of a grid field's trigonometric interpolant over each bin.
Eigen::VectorXcd bin_average(const TorusField& g, int n_bins);

struct BiasDiagnostic {
    double max_abs_change = 0.0;  ///< max over bins of |W(2y0) − W(y0)|
    double max_std_error = 0.0;   ///< max over bins of the larger SE
};

/// Reruns gv_estimate_W at 2·y0 and compares.
BiasDiagnostic y0_bias_diagnostic(const TorusField& f, const DiffusionSpec& spec, const MCConfig& cfg);

}  // namespace gvmult
