#include "mcsv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mcsv/errors.hpp"

namespace mcsv {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// Pointwise quantities shared by the energy, its gradient and the Hessian.
struct State {
  ScalarField lap;  // Δu
  ScalarField t;    // e^{u*}
  FieldValues fv;   // f, f', f'' at t
  ScalarField c;    // f'(t) t
  ScalarField dc;   // d c / d u* = (f''(t) t + f'(t)) t
};

State evaluate_state(const ScalarField& u, const BackgroundData& bg, const NonlinearityModel& model,
                     bool need_laplacian = true) {
  State st;
  if (need_laplacian) st.lap = laplacian(u);
  st.t = exp(u) * bg.exp_u0;
  st.fv = eval_field(model, st.t);
  st.c = st.fv.df * st.t;
  st.dc = (st.fv.d2f * st.t + st.fv.df) * st.t;
  return st;
}

void require_grid(const ScalarField& u, const BackgroundData& bg) {
  if (!(u.grid() == bg.grid())) throw GridMismatch("field and background live on different grids");
}

// ---------------------------------------------------------------------------
// Truncated Newton–CG on an energy functional.

class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const ScalarField& u) const = 0;
  virtual ScalarField gradient(const ScalarField& u) const = 0;
  /// Freezes the linearisation at u.
  virtual void linearize(const ScalarField& u) = 0;
  virtual ScalarField hessian_apply(const ScalarField& phi) const = 0;
  virtual ScalarField precondition(const ScalarField& r) const = 0;
  /// Hook for per-iterate admissibility checks.
  virtual void check_iterate(const ScalarField&) const {}
};

struct NewtonResult {
  ScalarField u;
  double residual = 0.0;
  int iterations = 0;
  int krylov_iterations = 0;
  std::vector<double> energy_history;
};

// CG on the frozen Hessian with negative-curvature exit. Returns a descent
// direction for the energy.
ScalarField truncated_cg(const Objective& obj, const ScalarField& g, double rel_tol, int max_iter,
                         int& iterations) {
  ScalarField x(g.grid(), 0.0);
  ScalarField r = -g;
  ScalarField z = obj.precondition(r);
  ScalarField p = z;
  double rz = inner(r, z);
  const double gnorm = l2_norm(g);
  iterations = 0;
  for (int k = 0; k < max_iter; ++k) {
    ++iterations;
    const ScalarField jp = obj.hessian_apply(p);
    const double curvature = inner(p, jp);
    if (!(curvature > 0.0)) return k == 0 ? z : x;
    const double alpha = rz / curvature;
    x += alpha * p;
    r -= alpha * jp;
    if (l2_norm(r) <= rel_tol * gnorm) break;
    z = obj.precondition(r);
    const double rz_next = inner(r, z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return x;
}

// Energy at u, or false when u is inadmissible or the value is not finite.
bool try_value(const Objective& obj, const ScalarField& u, double& out) {
  try {
    out = obj.value(u);
  } catch (const PreconditionViolated&) {
    return false;
  }
  return std::isfinite(out);
}

NewtonResult newton_minimize(Objective& obj, ScalarField u, const SolverTolerances& tol) {
  NewtonResult res;
  obj.check_iterate(u);
  double e = obj.value(u);
  ScalarField g = obj.gradient(u);
  double gnorm = l2_norm(g);
  res.energy_history.push_back(e);

  int it = 0;
  for (; it < tol.max_newton_iters && gnorm > tol.newton_tol; ++it) {
    obj.linearize(u);
    const double eta = std::clamp(std::sqrt(gnorm), 1e-3 * tol.krylov_tol, 0.1);
    int cg_iters = 0;
    ScalarField p = truncated_cg(obj, g, eta, tol.max_krylov_iters, cg_iters);
    res.krylov_iterations += cg_iters;
    double slope = inner(g, p);
    if (!(slope < 0.0)) {
      p = -obj.precondition(g);
      slope = inner(g, p);
    }

    // Armijo backtracking on the energy while its predicted decrease is
    // resolvable in double precision; below that, accept steps that reduce
    // the residual without raising the energy beyond its rounding error.
    const double noise = 1e-13 * std::max(1.0, std::abs(e));
    const bool energy_resolvable = -slope > 1e3 * noise;
    bool accepted = false;
    ScalarField u_next;
    ScalarField g_next;
    double e_next = e;
    double alpha = 1.0;
    for (int ls = 0; ls < 40 && energy_resolvable; ++ls) {
      u_next = u + alpha * p;
      if (try_value(obj, u_next, e_next) && e_next <= e + 1e-4 * alpha * slope) {
        accepted = true;
        g_next = obj.gradient(u_next);
        break;
      }
      alpha *= 0.5;
    }
    alpha = 1.0;
    for (int ls = 0; ls < 20 && !accepted; ++ls) {
      u_next = u + alpha * p;
      if (try_value(obj, u_next, e_next) && e_next <= e + noise) {
        g_next = obj.gradient(u_next);
        if (l2_norm(g_next) < gnorm) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw NoConvergence("Newton line search failed", it, gnorm);
    }
    u = std::move(u_next);
    obj.check_iterate(u);
    e = e_next;
    g = std::move(g_next);
    gnorm = l2_norm(g);
    res.energy_history.push_back(e);
  }
  if (!(gnorm <= tol.newton_tol)) throw NoConvergence("Newton iteration did not converge", it, gnorm);
  res.u = std::move(u);
  res.residual = gnorm;
  res.iterations = it;
  return res;
}

// ---------------------------------------------------------------------------

class CoupledObjective : public Objective {
 public:
  CoupledObjective(const ProblemSpec& spec, const BackgroundData& bg) : spec_(spec), bg_(bg) {}

  double value(const ScalarField& u) const override { return energy(u, spec_, bg_); }
  ScalarField gradient(const ScalarField& u) const override { return energy_gradient(u, spec_, bg_); }

  void check_iterate(const ScalarField& u) const override {
    const double c_max = coefficient_sup(u, bg_, spec_.model);
    if (!(spec_.q > c_max))
      throw QTooSmall("q = " + std::to_string(spec_.q) + " does not exceed ||c||_inf = " +
                          std::to_string(c_max),
                      spec_.q, c_max);
  }

  void linearize(const ScalarField& u) override {
    const State st = evaluate_state(u, bg_, spec_.model);
    const double q = spec_.q;
    const double a = bg_.source_density();
    c_ = st.c;
    diag_ = ScalarField(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) {
      diag_[k] = -st.dc[k] * (st.lap[k] - a) / q + st.dc[k] * (st.fv.f[k] - spec_.model.s()) +
                 st.c[k] * st.c[k];
    }
    shift_ = std::max(1.0, st.fv.df.min() * st.t.min());
  }

  ScalarField hessian_apply(const ScalarField& phi) const override {
    const double q = spec_.q;
    const ScalarField lap_phi = laplacian(phi);
    ScalarField out = apply_radial_symbol(phi, [q](double k2) { return k2 * k2 / (q * q) + k2; });
    out -= (laplacian(c_ * phi) + c_ * lap_phi) * (1.0 / q);
    out += diag_ * phi;
    return out;
  }

  ScalarField precondition(const ScalarField& r) const override {
    const double q = spec_.q;
    const double lambda = shift_;
    return apply_radial_symbol(r, [q, lambda](double k2) { return 1.0 / (k2 * k2 / (q * q) + k2 + lambda); });
  }

 private:
  const ProblemSpec& spec_;
  const BackgroundData& bg_;
  ScalarField c_;
  ScalarField diag_;
  double shift_ = 1.0;
};

class LimitObjective : public Objective {
 public:
  LimitObjective(const NonlinearityModel& model, const BackgroundData& bg) : model_(model), bg_(bg) {}

  double value(const ScalarField& u) const override { return limit_energy(u, model_, bg_); }
  ScalarField gradient(const ScalarField& u) const override { return limit_residual(u, model_, bg_); }

  void linearize(const ScalarField& u) override {
    const State st = evaluate_state(u, bg_, model_, false);
    diag_ = st.dc * (st.fv.f - model_.s()) + st.c * st.c;
    shift_ = std::max(1.0, st.fv.df.min() * st.t.min());
  }

  ScalarField hessian_apply(const ScalarField& phi) const override {
    return apply_radial_symbol(phi, [](double k2) { return k2; }) + diag_ * phi;
  }

  ScalarField precondition(const ScalarField& r) const override {
    const double lambda = shift_;
    return apply_radial_symbol(r, [lambda](double k2) { return 1.0 / (k2 + lambda); });
  }

 private:
  const NonlinearityModel& model_;
  const BackgroundData& bg_;
  ScalarField diag_;
  double shift_ = 1.0;
};

}  // namespace

// ---------------------------------------------------------------------------

double ProblemSpec::bound_tol() const {
  if (tol.bound_tol >= 0.0) return tol.bound_tol;
  const double rel_sigma = vortices.sigma(grid) / grid.length;
  return 1e-6 + 10.0 * rel_sigma * rel_sigma;
}

void ProblemSpec::validate() const {
  grid.validate();
  vortices.validate(grid);
  if (!(q > 0.0) || !std::isfinite(q)) throw PreconditionViolated("q must be positive");
  if (forcing && !(forcing->grid() == grid)) throw GridMismatch("forcing lives on a different grid");
}

ScalarField SolutionBundle::exp_ustar() const { return exp(u) * background.exp_u0; }
ScalarField LimitSolution::exp_ustar() const { return exp(u_inf) * background.exp_u0; }

ScalarField CoefficientFields::G(const ScalarField& v) const {
  ScalarField out = G_partial;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += c[k] * (s - v[k]);
  return out;
}

ScalarField weighted_grad_squared(const ScalarField& u, const BackgroundData& bg) {
  require_grid(u, bg);
  const ScalarField cross = grad_dot(bg.exp_u0, u);
  const ScalarField gu2 = grad_squared(u);
  ScalarField out = bg.weight + 2.0 * cross + bg.exp_u0 * gu2;
  return exp(u) * out;
}

CoefficientFields coefficient_fields(const ScalarField& u, const BackgroundData& bg,
                                     const NonlinearityModel& model, double q) {
  require_grid(u, bg);
  const State st = evaluate_state(u, bg, model, false);
  const ScalarField e_grad2 = weighted_grad_squared(u, bg);
  CoefficientFields out;
  out.s = model.s();
  out.c = st.c;
  out.F = st.fv.f + st.c * (model.s() / q);
  out.G_partial = ScalarField(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double grad_term = (st.fv.d2f[k] * st.t[k] + st.fv.df[k]) * e_grad2[k];
    out.G_partial[k] = (grad_term + kFourPi * st.c[k] * bg.source[k]) / q;
  }
  return out;
}

ScalarField recover_v(const ScalarField& u, const BackgroundData& bg, const NonlinearityModel& model,
                      double q) {
  require_grid(u, bg);
  const ScalarField t = exp(u) * bg.exp_u0;
  const FieldValues fv = eval_field(model, t);
  ScalarField v = (bg.source_density() - laplacian(u)) * (1.0 / q);
  v += fv.f;
  return v;
}

double energy(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg) {
  require_grid(u, bg);
  const double q = spec.q;
  const double s = spec.model.s();
  const State st = evaluate_state(u, bg, spec.model);
  const ScalarField e_grad2 = weighted_grad_squared(u, bg);
  const ScalarField gu2 = grad_squared(u);
  const double f0 = spec.model.f0();

  ScalarField density(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double fs = st.fv.f[k] - s;
    density[k] = st.lap[k] * st.lap[k] / (2.0 * q * q) + 0.5 * gu2[k] + st.fv.df[k] * e_grad2[k] / q +
                 0.5 * fs * fs + bg.source_density() * u[k] +
                 kFourPi / q * bg.source[k] * (st.fv.f[k] - f0);
    if (spec.forcing) density[k] -= (*spec.forcing)[k] * u[k];
  }
  return integrate(density);
}

ScalarField energy_gradient(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg) {
  require_grid(u, bg);
  const double q = spec.q;
  const double a = bg.source_density();
  const State st = evaluate_state(u, bg, spec.model);
  const ScalarField lap_f = laplacian(st.fv.f);
  ScalarField out = laplacian(st.lap) * (1.0 / (q * q));
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double bracket = lap_f[k] + st.c[k] * (st.lap[k] - a);
    out[k] += -st.lap[k] - bracket / q + st.c[k] * (st.fv.f[k] - spec.model.s()) + a;
    if (spec.forcing) out[k] -= (*spec.forcing)[k];
  }
  return out;
}

ScalarField limit_residual(const ScalarField& u, const NonlinearityModel& model, const BackgroundData& bg) {
  require_grid(u, bg);
  const State st = evaluate_state(u, bg, model);
  ScalarField out = -st.lap;
  for (std::size_t k = 0; k < u.size(); ++k)
    out[k] += st.c[k] * (st.fv.f[k] - model.s()) + bg.source_density();
  return out;
}

double limit_energy(const ScalarField& u, const NonlinearityModel& model, const BackgroundData& bg) {
  require_grid(u, bg);
  const State st = evaluate_state(u, bg, model, false);
  const ScalarField gu2 = grad_squared(u);
  ScalarField density(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double fs = st.fv.f[k] - model.s();
    density[k] = 0.5 * gu2[k] + 0.5 * fs * fs + bg.source_density() * u[k];
  }
  return integrate(density);
}

double coefficient_sup(const ScalarField& u, const BackgroundData& bg, const NonlinearityModel& model) {
  const State st = evaluate_state(u, bg, model, false);
  return sup_norm(st.c);
}

ResidualNorms evaluate_residuals(const ScalarField& u, const ScalarField& v, const ScalarField& w,
                                 const ProblemSpec& spec, const BackgroundData& bg) {
  require_grid(u, bg);
  require_grid(v, bg);
  require_grid(w, bg);
  const double q = spec.q;
  const double a = bg.source_density();
  const State st = evaluate_state(u, bg, spec.model);
  ScalarField first = -st.lap;
  ScalarField second = -laplacian(v);
  ScalarField wdef(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) {
    first[k] -= q * (v[k] - st.fv.f[k]) - a;
    second[k] -= q * (st.c[k] * (spec.model.s() - v[k]) - q * (v[k] - st.fv.f[k]));
    wdef[k] = w[k] - (v[k] - st.fv.f[k]) * q;
  }
  ResidualNorms r;
  r.fourth_order = l2_norm(energy_gradient(u, spec, bg));
  r.first_equation = l2_norm(first);
  r.second_equation = l2_norm(second) / q;
  r.w_definition = sup_norm(wdef);
  return r;
}

SolutionBundle assemble_bundle(const ScalarField& u, const ProblemSpec& spec, const BackgroundData& bg) {
  SolutionBundle b;
  b.u = u;
  b.background = bg;
  b.spec = spec;
  b.q = spec.q;
  b.v = recover_v(u, bg, spec.model, spec.q);
  const FieldValues fv = eval_field(spec.model, exp(u) * bg.exp_u0);
  b.w = (b.v - fv.f) * spec.q;
  b.residuals = evaluate_residuals(b.u, b.v, b.w, spec, bg);
  return b;
}

double PointwiseBounds::excess() const {
  return std::max({0.0, lower - f_min, f_max - upper, lower - v_min, v_max - upper});
}

PointwiseBounds pointwise_bounds(const SolutionBundle& bundle) {
  const FieldValues fv = eval_field(bundle.spec.model, bundle.exp_ustar());
  PointwiseBounds b;
  b.f_min = fv.f.min();
  b.f_max = fv.f.max();
  b.v_min = bundle.v.min();
  b.v_max = bundle.v.max();
  b.lower = bundle.spec.model.f0();
  b.upper = bundle.spec.model.s();
  return b;
}

ScalarField default_initial_guess(const NonlinearityModel& model, const BackgroundData& bg) {
  // u = ln f^{-1}(s) - u0 puts f(e^{u*}) = s everywhere. It is a
  // supersolution of the limit equation: its residual is 4πρ >= 0.
  const double level = std::log(inverse(model, model.s()));
  return level - bg.u0;
}

namespace {

// Upper bound of d/du*[c (f - s)] = c'(f - s) + c^2 for f(e^{u*}) in [f(0), s].
double monotone_shift(const NonlinearityModel& model) {
  const double top = inverse(model, model.s());
  double k = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double t = top * i / 400.0;
    const FValues v = model.eval(t);
    const double c = v.df * t;
    const double dc = (v.d2f * t + v.df) * t;
    k = std::max(k, dc * (v.f - model.s()) + c * c);
  }
  return 1.1 * std::max(k, 1e-3);
}

}  // namespace

ScalarField monotone_limit_iteration(const NonlinearityModel& model, const BackgroundData& bg,
                                     double target, int max_iterations) {
  ScalarField u = default_initial_guess(model, bg);
  if (bg.n == 0) return u;
  const double k = monotone_shift(model);
  const double floor_level = std::log(inverse(model, model.s())) - 60.0;
  for (int it = 0; it < max_iterations; ++it) {
    const ScalarField g = limit_residual(u, model, bg);
    if (l2_norm(g) <= target) return u;
    u -= apply_radial_symbol(g, [k](double k2) { return 1.0 / (k2 + k); });
    // The sequence decreases monotonically; it only escapes to -inf when the
    // limit equation has no solution for this vortex data.
    if (u.max() + bg.u0.max() < floor_level)
      throw NoConvergence("monotone iteration for the limit equation diverges; no solution for this data",
                          it, l2_norm(g));
  }
  return u;
}

LimitSolution solve_limit(const ProblemSpec& spec) {
  spec.validate();
  const BackgroundData bg = compute_u0(spec.vortices, spec.grid);
  return solve_limit(spec, bg);
}

LimitSolution solve_limit(const ProblemSpec& spec, const BackgroundData& bg,
                          const std::optional<ScalarField>& init) {
  LimitObjective obj(spec.model, bg);
  const ScalarField start = init ? *init : monotone_limit_iteration(spec.model, bg, 1e-3, 20000);
  require_grid(start, bg);
  NewtonResult r = newton_minimize(obj, start, spec.tol);
  LimitSolution out;
  out.u_inf = std::move(r.u);
  out.background = bg;
  out.residual = r.residual;
  out.newton_iterations = r.iterations;
  out.energy_history = std::move(r.energy_history);
  return out;
}

SolutionBundle solve_coupled(const ProblemSpec& spec, const std::optional<ScalarField>& init) {
  spec.validate();
  const BackgroundData bg = compute_u0(spec.vortices, spec.grid);
  return solve_coupled(spec, bg, init);
}

SolutionBundle solve_coupled(const ProblemSpec& spec, const BackgroundData& bg,
                             const std::optional<ScalarField>& init) {
  ScalarField start;
  if (init) {
    start = *init;
  } else if (bg.n == 0) {
    start = default_initial_guess(spec.model, bg);
  } else {
    start = solve_limit(spec, bg).u_inf;
  }
  require_grid(start, bg);

  CoupledObjective obj(spec, bg);
  NewtonResult r = newton_minimize(obj, start, spec.tol);
  SolutionBundle bundle = assemble_bundle(r.u, spec, bg);
  bundle.residuals.newton_iterations = r.iterations;
  bundle.residuals.krylov_iterations = r.krylov_iterations;
  bundle.energy_history = std::move(r.energy_history);

  if (spec.forcing) return bundle;
  const PointwiseBounds bounds = pointwise_bounds(bundle);
  if (bounds.excess() > spec.bound_tol())
    throw BoundsViolation("converged state leaves [f(0), s] by " + std::to_string(bounds.excess()),
                          bounds.excess());
  return bundle;
}

}  // namespace mcsv
