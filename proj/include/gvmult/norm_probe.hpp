#pragma once

// Empirical L^p operator-norm lower bounds on T¹/T² and the catalog of
// explicit constants they are checked against.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gvmult/torus_spectral.hpp"

namespace gvmult {

/// A linear operator on grid fields with its claimed L^p bound.
struct ProbeOperator {
    std::string id;
    TorusGrid grid;
    std::function<TorusField(const TorusField&)> apply;
    std::function<double(double)> bound;  ///< p ↦ bound
    std::string bound_source;

    static ProbeOperator from_symbol(std::string id, const SymbolOperator& op, const TorusGrid& grid,
                                     std::function<double(double)> bound, std::string source);
};

struct ProbeConfig {
    int trials = 8;
    std::uint64_t seed = 1;
    int threads = 1;
    int levels = 4;          ///< step halvings in the coordinate ascent
    double tolerance = 0.02;  ///< relative slack on bound checks
};

struct ProbeReport {
    std::string op;
    double p = 2.0;
    double best_ratio = 0.0;
    double bound = 0.0;
    std::string bound_source;
    TorusField witness;
    int trials = 0;
    std::uint64_t seed = 0;
    double tolerance = 0.02;

    bool passed() const { return best_ratio <= bound * (1.0 + tolerance); }
};

/// ‖Tf‖_p/‖f‖_p; DomainError for f = 0.
double lp_ratio(const ProbeOperator& op, const TorusField& f, double p);

/// Real, zero-mean witnesses band-limited to |k| ≤ n/4, refined by greedy
/// coordinate ascent on their cosine/sine coefficients.
ProbeReport probe(const ProbeOperator& op, double p, const ProbeConfig& cfg = {});

/// Catalog of operators with explicit constants. `select` filters by id
/// (empty = all); unknown ids are a DomainError.
std::vector<ProbeOperator> bound_catalog(const std::vector<std::string>& select = {});

/// probe over catalog × ps (deduplicated, sorted).
std::vector<ProbeReport> verify_bound_suite(const std::vector<double>& ps, const ProbeConfig& cfg = {},
                                            const std::vector<std::string>& select = {});

/// 2^{8s}s²Γ(s)⁴/(4π²Γ(4s)).
double bessel_riesz_constant(double s);

}  // namespace gvmult
