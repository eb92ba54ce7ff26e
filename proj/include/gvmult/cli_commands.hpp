#pragma once

// Subcommands of the gvmult tool. Each takes a resolved key=value config,
// writes its artifacts under out_dir and returns the process exit code
// (0 all assertions passed, 1 assertion failure).

#include <iosfwd>
#include <string>

#include "gvmult/text_io.hpp"

namespace gvmult {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;

/// Fills every key the command reads that is not already set.
void apply_defaults(const std::string& command, KeyValueConfig& cfg);

/// spec=bm_drift|bessel|tabulated with sigma, m / s / tabulated_file.
DiffusionSpec spec_from_config(const KeyValueConfig& cfg);

int cmd_phi_table(const KeyValueConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_gv_verify(const KeyValueConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_norm_probe(const KeyValueConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_checks(const KeyValueConfig& cfg, const std::string& out_dir, std::ostream& log);

/// Full front end: argument parsing, config resolution, dispatch.
int run_cli(int argc, char** argv);

}  // namespace gvmult
