#pragma once

// Solver for the regularised vortex system on the torus
//
//   -Δu = q(v - f(e^{u0+u})) - 4πn/|Σ|
//   -Δv = q[f'(e^{u0+u}) e^{u0+u} (s - v) - q(v - f(e^{u0+u}))]
//
// v is eliminated through the first equation and the resulting fourth-order
// equation for u is solved by a truncated Newton–CG iteration on the energy
// functional. The same machinery solves the q → ∞ limit equation.

#include <optional>
#include <vector>

#include "mcsv/nonlinearity.hpp"
#include "mcsv/torus_grid.hpp"
#include "mcsv/vortex_background.hpp"

namespace mcsv {

struct SolverTolerances {
  double newton_tol = 1e-9;   ///< on the L^2 norm of the fourth-order residual
  double krylov_tol = 1e-10;  ///< Helmholtz solves and the inner CG floor
  int max_newton_iters = 60;
  int max_krylov_iters = 400;
  /// Slack for the pointwise bounds; negative selects 1e-6 + 10 (σ/L)^2.
  double bound_tol = -1.0;
};

struct ProblemSpec {
  NonlinearityModel model;
  VortexConfig vortices;
  double q = 1.0;
  GridSpec grid;
  SolverTolerances tol;
  /// Optional source g: the solver then finds u with energy_gradient(u) = g.
  /// Used for manufactured-solution tests.
  std::optional<ScalarField> forcing;

  double bound_tol() const;
  void validate() const;
};

struct ResidualNorms {
  double fourth_order = 0.0;  ///< ||energy_gradient(u)||_2
  double first_equation = 0.0;
  double second_equation = 0.0;  ///< divided by q
  double w_definition = 0.0;     ///< ||w - q(v - f(e^{u*}))||_inf
  int newton_iterations = 0;
  int krylov_iterations = 0;
};

struct SolutionBundle {
  ScalarField u;  ///< regular part; u* = u0 + u
  ScalarField v;
  ScalarField w;  ///< q(v - f(e^{u*}))
  BackgroundData background;
  ProblemSpec spec;
  double q = 0.0;
  ResidualNorms residuals;
  std::vector<double> energy_history;

  /// e^{u*} = e^{u0} e^{u}
  ScalarField exp_ustar() const;
};

struct LimitSolution {
  ScalarField u_inf;  ///< regular part of the limit solution
  BackgroundData background;
  double residual = 0.0;
  int newton_iterations = 0;
  std::vector<double> energy_history;

  ScalarField exp_ustar() const;
};

/// Coefficient fields of the triangular (u, v, w) form:
///   c   = f'(e^{u*}) e^{u*}
///   F_q = f(e^{u*}) + (s/q) c
///   G_q = c (s - v) + G_partial, with
///   G_partial = (1/q)(f''(e^{u*}) e^{u*} + f'(e^{u*})) e^{u*}|∇u*|^2 + (4π/q) c ρ.
/// The last term is the mollified-core contribution; it vanishes in the
/// point-vortex limit where c = 0 at each vortex.
struct CoefficientFields {
  ScalarField c;
  ScalarField F;
  ScalarField G_partial;
  double s = 0.0;

  ScalarField G(const ScalarField& v) const;
};

/// e^{u*}|∇u*|^2 assembled as e^u [weight + 2∇e^{u0}·∇u + e^{u0}|∇u|^2].
ScalarField weighted_grad_squared(const ScalarField& u, const BackgroundData& bg);

CoefficientFields coefficient_fields(const ScalarField& u, const BackgroundData& bg,
                                     const NonlinearityModel& model, double q);

/// v = q^{-1}(-Δu + 4πn/|Σ|) + f(e^{u0+u})
ScalarField recover_v(const ScalarField& u, const BackgroundData& bg,
                      const NonlinearityModel& model, double q);

/// I(u) = (1/2q^2)∫(Δu)^2 + (1/2)∫|∇u|^2 + (1/q)∫f'(e^{u*})e^{u*}|∇u*|^2
///        + (1/2)∫(f(e^{u*}) - s)^2 + (4πn/|Σ|)∫u + (4π/q)∫ρ (f(e^{u*}) - f(0))
///        [- ∫g u when a forcing g is set].
/// The ρ term is the mollified-core correction; it tends to zero with σ.
double energy(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg);

/// L^2 gradient of energy:
///   (1/q^2)Δ^2u - Δu - (1/q)[Δf(e^{u*}) + c(Δu - 4πn/|Σ|)] + c(f(e^{u*}) - s) + 4πn/|Σ| [- g].
/// Away from the vortex cores Δu - 4πn/|Σ| = Δu*.
ScalarField energy_gradient(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg);

/// Residual of the limit equation for the regular part,
///   -Δu + c(f(e^{u*}) - s) + 4πn/|Σ|.
ScalarField limit_residual(const ScalarField& u, const NonlinearityModel& model,
                           const BackgroundData& bg);
double limit_energy(const ScalarField& u, const NonlinearityModel& model, const BackgroundData& bg);

/// Residual norms of stored (u, v, w); iteration counts are left at zero.
ResidualNorms evaluate_residuals(const ScalarField& u, const ScalarField& v, const ScalarField& w,
                                 const ProblemSpec& spec, const BackgroundData& bg);

/// Builds v and w from u and fills in every residual norm.
SolutionBundle assemble_bundle(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg);

/// Coefficient bound checked before each Newton step: ||c||_inf < q.
double coefficient_sup(const ScalarField& u, const BackgroundData& bg, const NonlinearityModel& model);

struct PointwiseBounds {
  double f_min = 0.0, f_max = 0.0;  ///< range of f(e^{u*})
  double v_min = 0.0, v_max = 0.0;
  double lower = 0.0, upper = 0.0;  ///< f(0), s
  /// Largest amount by which any of the four extremes leaves [f(0), s].
  double excess() const;
};
PointwiseBounds pointwise_bounds(const SolutionBundle& bundle);

/// ln f^{-1}(s) - u0, a supersolution of the limit equation.
ScalarField default_initial_guess(const NonlinearityModel& model, const BackgroundData& bg);

/// Monotone iteration (-Δ + K)u_{k+1} = K u_k - limit_residual(u_k) from the
/// supersolution, stopped once the residual is below target. It approaches
/// the maximal solution from above. Throws NoConvergence if the iterates
/// run off to -inf (no solution exists).
ScalarField monotone_limit_iteration(const NonlinearityModel& model, const BackgroundData& bg,
                                     double target, int max_iterations);

LimitSolution solve_limit(const ProblemSpec& spec);
LimitSolution solve_limit(const ProblemSpec& spec, const BackgroundData& bg,
                          const std::optional<ScalarField>& init = std::nullopt);

/// Newton–CG on energy_gradient(u) = 0. Without an initial guess the limit
/// solution is used (a constant when n = 0). Throws BoundsViolation when the
/// result leaves [f(0), s] by more than bound_tol; forced problems skip that
/// check since the bounds only hold for the unforced system.
SolutionBundle solve_coupled(const ProblemSpec& spec, const std::optional<ScalarField>& init = std::nullopt);
SolutionBundle solve_coupled(const ProblemSpec& spec, const BackgroundData& bg,
                             const std::optional<ScalarField>& init);

}  // namespace mcsv
