#pragma once

// Run configuration: an INI file with sections
//
//   [model]    name = u1 | cp1 | custom, s, threshold, table (custom only)
//   [vortices] one key per point: x y [multiplicity], fractions of the period
//   [grid]     N, length, sigma (in grid cells)
//   [solver]   q or q_list, newton_tol, krylov_tol, max_newton_iters,
//              max_krylov_iters, bound_tol
//   [output]   dir
//
// For cp1 the physical constants may be given instead: S in [model] sets
// s = -S and Q in [solver] sets q = 2Q.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcsv/solver.hpp"

namespace mcsv {

struct RunConfig {
  NonlinearityModel model;
  VortexConfig vortices;
  GridSpec grid;
  SolverTolerances tol;
  std::optional<double> q;
  std::vector<double> q_list;
  std::string output_dir = "out";

  /// Problem at q, or at the first entry of q_list.
  ProblemSpec problem() const;
};

/// Parses and validates. Throws ConfigError naming the line or field.
/// Relative table paths resolve against base_dir.
RunConfig parse_config(std::istream& in, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Reads "t f" pairs, one per line; '#' starts a comment.
NonlinearityModel load_custom_table(const std::string& path, double s, double threshold);

}  // namespace mcsv
