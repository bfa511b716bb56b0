#pragma once

// The solve, sweep and verify commands behind the mcsv executable.
//
// Exit codes: 0 success with every check passing, 1 bad configuration or
// unreadable input, 2 a check failed, 3 the solver did not converge.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcsv/diagnostics.hpp"

namespace mcsv {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitCheckFailed = 2, kExitNoConvergence = 3 };

/// Writes u, v, w and u0 snapshots plus summary.txt into the output
/// directory (--out overrides the config's output.dir).
int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
              std::ostream& err);

/// Writes sweep.tsv: '#' metadata lines, a header row, one row per q.
int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
              std::ostream& err);

/// Re-runs every check on stored u, v, w snapshots (u0 is optional and, if
/// given, must match the vortex data).
int cmd_verify(const std::vector<std::string>& snapshot_paths, std::ostream& out, std::ostream& err);

/// One tab-separated line: name, status, discrepancy, tolerance, absolute and
/// relative discrepancy, lhs and rhs values (comma-separated), detail.
std::string format_report(const InvariantReport& report);
std::string report_header();

}  // namespace mcsv
