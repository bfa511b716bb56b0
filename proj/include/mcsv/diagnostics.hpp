#pragma once

// Executable forms of the integral identities and pointwise bounds satisfied
// by solutions, plus distances to the q → ∞ limit.
//
// Checks never throw on failure; they return a report whose status says so.

#include <string>
#include <vector>

#include "mcsv/solver.hpp"

namespace mcsv {

enum class CheckStatus { Pass, Fail, NotApplicable };

const char* to_string(CheckStatus status);

struct InvariantReport {
  std::string name;
  std::vector<double> lhs;
  std::vector<double> rhs;
  double abs_discrepancy = 0.0;
  double rel_discrepancy = 0.0;
  /// The gated quantity: either abs_discrepancy or rel_discrepancy.
  double discrepancy = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::NotApplicable;
  std::string detail;

  bool passed() const { return status != CheckStatus::Fail; }
};

/// min/max of f(e^{u*}) and v against [f(0), s], slack spec.bound_tol().
/// lhs = {f_min, f_max, v_min, v_max}, rhs = {f(0), s}.
InvariantReport check_bounds(const SolutionBundle& bundle);

/// ∫c(s - v) and ∫w against 4πn, relative 1e-6.
InvariantReport check_flux(const SolutionBundle& bundle);

/// ∫c(s - v) against ∫w, relative 1e-8 (scale max(1, 4πn)).
InvariantReport check_flux_agreement(const SolutionBundle& bundle);

/// ∫|∇v|^2 + ∫w^2 = ∫(s - v)(f''(e^{u*})e^{u*} + f'(e^{u*}))e^{u*}|∇u*|^2 + 4π∫(s - v)cρ,
/// relative 1e-4. The last term comes from the mollified cores and tends to
/// zero with σ; the report carries it separately as rhs[1].
InvariantReport check_identity(const SolutionBundle& bundle);

/// ∫e^{u*}|∇u*|^2 = q∫e^{u*}(v - f(e^{u*})) - 4π∫ρe^{u*}, relative 1e-6.
/// lhs[0] is the common value tracked across q sweeps.
InvariantReport check_gradu(const SolutionBundle& bundle);

/// argmax v lies at distance >= 5σ from every vortex. NotApplicable if n = 0.
InvariantReport check_max_location(const SolutionBundle& bundle);

/// Without vortices v is constant: oscillation <= 1e-9. NotApplicable if n >= 1.
InvariantReport check_v_constancy(const SolutionBundle& bundle);

/// Residuals of the fourth-order equation, of the (u, v) system and of the
/// triangular (u, v, w) system, each against 10·newton_tol; the definition
/// of w against 1e-12·max(1, ||w||_∞).
std::vector<InvariantReport> check_residuals(const SolutionBundle& bundle);

/// v and w recomputed by Helmholtz solves with the frozen coefficient c,
///   -Δv + q^2(1 + c/q)v = q^2 F_q,   -Δw + q^2(1 + c/q)w = q^2 G_q,
/// compared in sup norm against the stored fields (10·newton_tol).
std::vector<InvariantReport> check_helmholtz_routes(const SolutionBundle& bundle);

/// Every report above in a fixed order. Independent checks run on up to
/// MCSV_THREADS threads (default 1); the result does not depend on it.
std::vector<InvariantReport> all_reports(const SolutionBundle& bundle);

int diagnostics_threads();

struct ConvergenceRow {
  double q = 0.0;
  std::string status;  ///< "converged" or the failure kind
  std::string message;
  int newton_iterations = 0;
  double residual = 0.0;
  double d_eu = 0.0;  ///< ||e^{u*} - e^{ũ_∞}||_∞
  double d_v = 0.0;   ///< ||v - f(e^{ũ_∞})||_∞
  double d_w = 0.0;   ///< ||w - c_∞(s - f(e^{ũ_∞}))||_∞
  double du_h[3] = {0, 0, 0};   ///< H^k norms of u - u_∞, k = 0, 1, 2
  double deu_h[3] = {0, 0, 0};  ///< H^k norms of e^{u*} - e^{ũ_∞}
  double dv_h[3] = {0, 0, 0};   ///< H^k norms of v - f(e^{ũ_∞})
  double u_h[3] = {0, 0, 0};    ///< H^k norms of u
  double v_h[3] = {0, 0, 0};    ///< H^k norms of v
  double gradu = 0.0;           ///< ∫e^{u*}|∇u*|^2
  double bound_excess = 0.0;
  bool all_checks_pass = false;

  bool converged() const { return status == "converged"; }
};

/// Distances from a bundle to the limit solution. Fills the metric fields
/// of a row (not q, status or the per-run norms). Throws GridMismatch when
/// grids or vortex data differ.
ConvergenceRow convergence_metrics(const SolutionBundle& bundle, const LimitSolution& limit);

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  ///< ordered by q
  double limit_residual = 0.0;
  int limit_newton_iterations = 0;
};

/// Solves at each q in turn, warm-starting from the previous converged u
/// (the first from the limit solution). Solver failures become rows with a
/// failure status. Throws PreconditionViolated unless q_list is nonempty,
/// positive and strictly ascending; a failing limit solve propagates.
ConvergenceTable q_sweep(const ProblemSpec& spec, const std::vector<double>& q_list);

}  // namespace mcsv
