#pragma once

// Plain-text formats shared by the command-line front end.
//
//   tabulated <n> <y_max>     then n lines "y a b"
//   atom <loc|inf> <re> <im>  / density <y> <w> <re> <im>   (measure files)
//   field <dim> <n>           then n^dim lines "re im"
//
// Blank lines and lines starting with '#' are ignored everywhere.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gvmult/montecarlo.hpp"
#include "gvmult/multiplier.hpp"
#include "gvmult/torus_spectral.hpp"
#include "gvmult/vertical_diffusion.hpp"

namespace gvmult {

inline constexpr const char* kSchemaVersion = "gvmult/1";

DiffusionSpec read_tabulated(std::istream& in);
MeasureAlpha read_measure(std::istream& in);
TorusField read_field(std::istream& in);
void write_field(std::ostream& out, const TorusField& f);

DiffusionSpec load_tabulated(const std::string& path);
MeasureAlpha load_measure(const std::string& path);
TorusField load_field(const std::string& path);

/// %.17g.
std::string fmt(double x);

/// Flat key=value configuration. Keys are kept sorted so echoes are stable.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in);
    static KeyValueConfig load(const std::string& path);

    /// "key=value"; ValidationError if there is no '='.
    void set_assignment(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set_default(const std::string& key, const std::string& value) { values_.emplace(key, value); }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    /// Comma-separated doubles; an empty value gives an empty list.
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// "# schema=…" followed by one "# key=value" line per config entry.
void write_preamble(std::ostream& out, const KeyValueConfig& cfg);

/// bin_center[,bin_center2],estimate_re,estimate_im,std_error,n_effective
void write_ensemble_csv(std::ostream& out, const EnsembleResult& r);

}  // namespace gvmult
