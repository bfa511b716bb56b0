#include "mcsv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "mcsv/errors.hpp"

namespace mcsv {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

double ratio(double num, double scale) { return scale > 0.0 ? num / scale : (num > 0.0 ? num : 0.0); }

InvariantReport make_report(std::string name, std::vector<double> lhs, std::vector<double> rhs,
                            double abs_disc, double scale, bool gate_relative, double tolerance) {
  InvariantReport r;
  r.name = std::move(name);
  r.lhs = std::move(lhs);
  r.rhs = std::move(rhs);
  r.abs_discrepancy = abs_disc;
  r.rel_discrepancy = ratio(abs_disc, scale);
  r.discrepancy = gate_relative ? r.rel_discrepancy : r.abs_discrepancy;
  r.tolerance = tolerance;
  r.status = r.discrepancy <= tolerance ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

InvariantReport not_applicable(std::string name, std::string why) {
  InvariantReport r;
  r.name = std::move(name);
  r.status = CheckStatus::NotApplicable;
  r.detail = std::move(why);
  return r;
}

double flux_target(const SolutionBundle& b) { return kFourPi * b.background.n; }

}  // namespace

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::NotApplicable: return "n/a";
  }
  return "?";
}

InvariantReport check_bounds(const SolutionBundle& bundle) {
  const PointwiseBounds b = pointwise_bounds(bundle);
  const double excess = b.excess();
  return make_report("bounds", {b.f_min, b.f_max, b.v_min, b.v_max}, {b.lower, b.upper}, excess,
                     b.upper - b.lower, false, bundle.spec.bound_tol());
}

InvariantReport check_flux(const SolutionBundle& bundle) {
  const CoefficientFields cf = coefficient_fields(bundle.u, bundle.background, bundle.spec.model, bundle.q);
  const double a = integrate(cf.c * (cf.s - bundle.v));
  const double b = integrate(bundle.w);
  const double target = flux_target(bundle);
  const double dev = std::max(std::abs(a - target), std::abs(b - target));
  return make_report("flux", {a, b}, {target}, dev, std::max(1.0, target), true, 1e-6);
}

InvariantReport check_flux_agreement(const SolutionBundle& bundle) {
  const CoefficientFields cf = coefficient_fields(bundle.u, bundle.background, bundle.spec.model, bundle.q);
  const double a = integrate(cf.c * (cf.s - bundle.v));
  const double b = integrate(bundle.w);
  return make_report("flux_agreement", {a}, {b}, std::abs(a - b), std::max(1.0, flux_target(bundle)), true,
                     1e-8);
}

InvariantReport check_identity(const SolutionBundle& bundle) {
  const BackgroundData& bg = bundle.background;
  const NonlinearityModel& model = bundle.spec.model;
  const ScalarField t = bundle.exp_ustar();
  const FieldValues fv = eval_field(model, t);
  const ScalarField e_grad2 = weighted_grad_squared(bundle.u, bg);
  const ScalarField sv = model.s() - bundle.v;

  const double lhs = integrate(grad_squared(bundle.v)) + integrate(bundle.w * bundle.w);
  const double rhs_point = integrate(sv * (fv.d2f * t + fv.df) * e_grad2);
  const double rhs_core = kFourPi * integrate(sv * fv.df * t * bg.source);
  const double rhs = rhs_point + rhs_core;
  InvariantReport r = make_report("identity", {lhs}, {rhs_point, rhs_core}, std::abs(lhs - rhs),
                                  std::max(std::abs(lhs), std::abs(rhs)), true, 1e-4);
  char buf[160];
  std::snprintf(buf, sizeof buf, "without core term: relative %.3e",
                ratio(std::abs(lhs - rhs_point), std::max(std::abs(lhs), std::abs(rhs_point))));
  r.detail = buf;
  return r;
}

InvariantReport check_gradu(const SolutionBundle& bundle) {
  const BackgroundData& bg = bundle.background;
  const ScalarField t = bundle.exp_ustar();
  const FieldValues fv = eval_field(bundle.spec.model, t);
  const double lhs = integrate(weighted_grad_squared(bundle.u, bg));
  const double bulk = bundle.q * integrate(t * (bundle.v - fv.f));
  const double core = kFourPi * integrate(bg.source * t);
  const double rhs = bulk - core;
  InvariantReport r = make_report("gradu", {lhs}, {bulk, core}, std::abs(lhs - rhs),
                                  std::max(std::abs(lhs), std::abs(rhs)), true, 1e-6);
  char buf[96];
  std::snprintf(buf, sizeof buf, "ratio %.17e", rhs != 0.0 ? lhs / rhs : 1.0);
  r.detail = buf;
  return r;
}

InvariantReport check_max_location(const SolutionBundle& bundle) {
  const BackgroundData& bg = bundle.background;
  if (bg.n == 0) return not_applicable("max_location", "no vortices");
  const GridSpec& g = bundle.v.grid();
  std::size_t best = 0;
  for (std::size_t k = 1; k < bundle.v.size(); ++k)
    if (bundle.v[k] > bundle.v[best]) best = k;
  const double x = g.coord(static_cast<int>(best / g.n));
  const double y = g.coord(static_cast<int>(best % g.n));
  double dist = std::numeric_limits<double>::infinity();
  for (const Vortex& p : bg.points)
    dist = std::min(dist, torus_distance(g, x, y, p.x * g.length, p.y * g.length));
  const double need = 5.0 * bg.sigma;
  InvariantReport r = make_report("max_location", {dist}, {need}, std::max(0.0, need - dist), need, false, 0.0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "argmax v at (%.6e, %.6e)", x, y);
  r.detail = buf;
  return r;
}

InvariantReport check_v_constancy(const SolutionBundle& bundle) {
  if (bundle.background.n != 0) return not_applicable("v_constancy", "vortices present");
  const double osc = bundle.v.oscillation();
  return make_report("v_constancy", {bundle.v.min(), bundle.v.max()}, {bundle.spec.model.s()}, osc, 1.0, false,
                     1e-9);
}

std::vector<InvariantReport> check_residuals(const SolutionBundle& bundle) {
  const SolutionBundle& b = bundle;
  const ResidualNorms r = evaluate_residuals(b.u, b.v, b.w, b.spec, b.background);
  const double tol = 10.0 * b.spec.tol.newton_tol;
  const double q = b.q;

  // Triangular form: -Δu = w - 4πn/|Σ|, and the Helmholtz forms of the v and
  // w equations (divided by q and q^2 respectively).
  const CoefficientFields cf = coefficient_fields(b.u, b.background, b.spec.model, q);
  const ScalarField iteru = -laplacian(b.u) - b.w + b.background.source_density();
  const ScalarField iterv = (helmholtz_apply(cf.c, b.v, q) - cf.F * (q * q)) * (1.0 / q);
  const ScalarField iterw = (helmholtz_apply(cf.c, b.w, q) - cf.G(b.v) * (q * q)) * (1.0 / (q * q));

  std::vector<InvariantReport> out;
  out.push_back(make_report("residual_fourth_order", {r.fourth_order}, {0.0}, r.fourth_order, 1.0, false, tol));
  out.push_back(make_report("residual_first_equation", {r.first_equation}, {0.0}, r.first_equation, 1.0, false, tol));
  out.push_back(
      make_report("residual_second_equation", {r.second_equation}, {0.0}, r.second_equation, 1.0, false, tol));
  const double ru = l2_norm(iteru), rv = l2_norm(iterv), rw = l2_norm(iterw);
  out.push_back(make_report("residual_triangular_u", {ru}, {0.0}, ru, 1.0, false, tol));
  out.push_back(make_report("residual_triangular_v", {rv}, {0.0}, rv, 1.0, false, tol));
  out.push_back(make_report("residual_triangular_w", {rw}, {0.0}, rw, 1.0, false, tol));
  const double wscale = std::max(1.0, sup_norm(b.w));
  out.push_back(make_report("w_definition", {r.w_definition}, {0.0}, r.w_definition, wscale, true, 1e-12));
  return out;
}

std::vector<InvariantReport> check_helmholtz_routes(const SolutionBundle& bundle) {
  const SolutionBundle& b = bundle;
  const double tol = 10.0 * b.spec.tol.newton_tol;
  const CoefficientFields cf = coefficient_fields(b.u, b.background, b.spec.model, b.q);
  HelmholtzOptions opt;
  opt.tol = std::min(b.spec.tol.krylov_tol, 1e-12);

  auto route = [&](const char* name, const ScalarField& rhs, const ScalarField& stored) {
    try {
      const ScalarField x = helmholtz_solve(cf.c, rhs, b.q, opt);
      const double d = sup_norm(x - stored);
      return make_report(name, {sup_norm(x)}, {sup_norm(stored)}, d, std::max(1.0, sup_norm(stored)), false, tol);
    } catch (const Error& e) {
      InvariantReport r;
      r.name = name;
      r.status = CheckStatus::Fail;
      r.abs_discrepancy = r.rel_discrepancy = r.discrepancy = std::numeric_limits<double>::infinity();
      r.tolerance = tol;
      r.detail = e.what();
      return r;
    }
  };
  return {route("helmholtz_v", cf.F, b.v), route("helmholtz_w", cf.G(b.v), b.w)};
}

int diagnostics_threads() {
  const char* env = std::getenv("MCSV_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 64));
}

std::vector<InvariantReport> all_reports(const SolutionBundle& bundle) {
  using Task = std::function<std::vector<InvariantReport>()>;
  const SolutionBundle& b = bundle;
  const std::vector<Task> tasks = {
      [&] { return std::vector{check_bounds(b)}; },
      [&] { return std::vector{check_flux(b), check_flux_agreement(b)}; },
      [&] { return std::vector{check_identity(b)}; },
      [&] { return std::vector{check_gradu(b)}; },
      [&] { return std::vector{check_max_location(b), check_v_constancy(b)}; },
      [&] { return check_residuals(b); },
      [&] { return check_helmholtz_routes(b); },
  };
  std::vector<std::vector<InvariantReport>> results(tasks.size());
  const int threads = std::min<int>(diagnostics_threads(), static_cast<int>(tasks.size()));
  if (threads <= 1) {
    for (std::size_t k = 0; k < tasks.size(); ++k) results[k] = tasks[k]();
  } else {
    std::vector<std::exception_ptr> errors(tasks.size());
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t k = w; k < tasks.size(); k += threads) {
            try {
              results[k] = tasks[k]();
            } catch (...) {
              errors[k] = std::current_exception();
            }
          }
        });
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<InvariantReport> out;
  for (auto& r : results)
    for (auto& rep : r) out.push_back(std::move(rep));
  return out;
}

ConvergenceRow convergence_metrics(const SolutionBundle& bundle, const LimitSolution& limit) {
  if (!(bundle.u.grid() == limit.u_inf.grid()))
    throw GridMismatch("bundle and limit solution live on different grids");
  const auto& pa = bundle.background.points;
  const auto& pb = limit.background.points;
  bool same = pa.size() == pb.size() && bundle.background.sigma == limit.background.sigma;
  for (std::size_t k = 0; same && k < pa.size(); ++k)
    same = pa[k].x == pb[k].x && pa[k].y == pb[k].y && pa[k].multiplicity == pb[k].multiplicity;
  if (!same) throw GridMismatch("bundle and limit solution use different vortex data");

  const NonlinearityModel& model = bundle.spec.model;
  const ScalarField t = bundle.exp_ustar();
  const ScalarField t_inf = limit.exp_ustar();
  const FieldValues fv_inf = eval_field(model, t_inf);
  const ScalarField w_inf = fv_inf.df * t_inf * (model.s() - fv_inf.f);

  const ScalarField du = bundle.u - limit.u_inf;
  const ScalarField deu = t - t_inf;
  const ScalarField dv = bundle.v - fv_inf.f;

  ConvergenceRow row;
  row.d_eu = sup_norm(deu);
  row.d_v = sup_norm(dv);
  row.d_w = sup_norm(bundle.w - w_inf);
  for (int k = 0; k < 3; ++k) {
    row.du_h[k] = sobolev_norm(du, k);
    row.deu_h[k] = sobolev_norm(deu, k);
    row.dv_h[k] = sobolev_norm(dv, k);
  }
  return row;
}

ConvergenceTable q_sweep(const ProblemSpec& spec, const std::vector<double>& q_list) {
  if (q_list.empty()) throw PreconditionViolated("q_list must not be empty");
  for (std::size_t k = 0; k < q_list.size(); ++k) {
    if (!(q_list[k] > 0.0) || !std::isfinite(q_list[k])) throw PreconditionViolated("q_list entries must be positive");
    if (k > 0 && !(q_list[k] > q_list[k - 1])) throw PreconditionViolated("q_list must be ascending");
  }
  ProblemSpec base = spec;
  base.q = q_list.front();
  base.validate();
  const BackgroundData bg = compute_u0(base.vortices, base.grid);
  const LimitSolution limit = solve_limit(base, bg);

  ConvergenceTable table;
  table.limit_residual = limit.residual;
  table.limit_newton_iterations = limit.newton_iterations;
  ScalarField warm = limit.u_inf;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (double q : q_list) {
    ProblemSpec sq = base;
    sq.q = q;
    ConvergenceRow row;
    try {
      const SolutionBundle b = solve_coupled(sq, bg, warm);
      row = convergence_metrics(b, limit);
      row.status = "converged";
      row.newton_iterations = b.residuals.newton_iterations;
      row.residual = b.residuals.fourth_order;
      for (int k = 0; k < 3; ++k) {
        row.u_h[k] = sobolev_norm(b.u, k);
        row.v_h[k] = sobolev_norm(b.v, k);
      }
      row.gradu = check_gradu(b).lhs[0];
      row.bound_excess = pointwise_bounds(b).excess();
      const auto reports = all_reports(b);
      row.all_checks_pass = std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); });
      warm = b.u;
    } catch (const Error& e) {
      row = ConvergenceRow{};
      row.d_eu = row.d_v = row.d_w = row.gradu = row.bound_excess = row.residual = nan;
      for (int k = 0; k < 3; ++k) row.du_h[k] = row.deu_h[k] = row.dv_h[k] = row.u_h[k] = row.v_h[k] = nan;
      if (const auto* nc = dynamic_cast<const NoConvergence*>(&e)) {
        row.status = "no_convergence";
        row.newton_iterations = nc->iterations();
        row.residual = nc->residual();
      } else if (dynamic_cast<const QTooSmall*>(&e)) {
        row.status = "q_too_small";
      } else if (dynamic_cast<const BoundsViolation*>(&e)) {
        row.status = "bounds_violation";
      } else {
        row.status = "error";
      }
      row.message = e.what();
    }
    row.q = q;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace mcsv
