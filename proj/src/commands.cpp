#include "mcsv/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "mcsv/config.hpp"
#include "mcsv/errors.hpp"
#include "mcsv/snapshot.hpp"

namespace mcsv {

namespace fs = std::filesystem;

namespace {

std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

std::string sci_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + sci(xs[k]);
  return out.empty() ? "-" : out;
}

bool all_pass(const std::vector<InvariantReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); });
}

void print_reports(std::ostream& os, const std::vector<InvariantReport>& reports) {
  os << report_header() << '\n';
  for (const auto& r : reports) os << format_report(r) << '\n';
}

std::optional<RunConfig> load_or_report(const std::string& path, std::ostream& err) {
  try {
    return load_config(path);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return std::nullopt;
  }
}

bool prepare_dir(const fs::path& dir, std::ostream& err) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << "cannot create output directory '" << dir.string() << "': " << ec.message() << '\n';
    return false;
  }
  return true;
}

void write_metadata(std::ostream& os, const ProblemSpec& spec, const char* prefix) {
  os << prefix << "N=" << spec.grid.n << '\n';
  for (const auto& [k, v] : encode_problem(spec)) os << prefix << k << '=' << v << '\n';
  int n = 0;
  for (const auto& p : spec.vortices.points) n += p.multiplicity;
  os << prefix << "n=" << n << '\n';
  os << prefix << "sigma=" << sci(spec.vortices.sigma(spec.grid)) << '\n';
  os << prefix << "bound_tol=" << sci(spec.bound_tol()) << '\n';
}

}  // namespace

std::string report_header() { return "name\tstatus\tdiscrepancy\ttolerance\tabs\trel\tlhs\trhs\tdetail"; }

std::string format_report(const InvariantReport& r) {
  std::string line = r.name + '\t' + to_string(r.status) + '\t' + sci(r.discrepancy) + '\t' + sci(r.tolerance) +
                     '\t' + sci(r.abs_discrepancy) + '\t' + sci(r.rel_discrepancy) + '\t' + sci_list(r.lhs) + '\t' +
                     sci_list(r.rhs) + '\t' + (r.detail.empty() ? "-" : r.detail);
  return line;
}

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
              std::ostream& err) {
  const auto cfg = load_or_report(config_path, err);
  if (!cfg) return kExitConfig;
  if (!cfg->q) {
    err << "config error: solve needs a single solver.q, not q_list\n";
    return kExitConfig;
  }
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(cfg->output_dir);
  if (!prepare_dir(dir, err)) return kExitConfig;
  const ProblemSpec spec = cfg->problem();

  std::ofstream summary(dir / "summary.txt");
  if (!summary) {
    err << "cannot write " << (dir / "summary.txt").string() << '\n';
    return kExitConfig;
  }
  summary << "# mcsv solve summary\n";
  write_metadata(summary, spec, "");

  auto fail = [&](const char* status, const std::string& message, int code) {
    summary << "status=" << status << "\nmessage=" << message << "\nexit_code=" << code << '\n';
    err << status << ": " << message << '\n';
    return code;
  };

  SolutionBundle bundle;
  try {
    bundle = solve_coupled(spec);
  } catch (const QTooSmall& e) {
    return fail("q_too_small", e.what(), kExitNoConvergence);
  } catch (const NoConvergence& e) {
    return fail("no_convergence", e.what() + std::string(" (iterations ") + std::to_string(e.iterations()) +
                                      ", residual " + sci(e.residual()) + ")",
                kExitNoConvergence);
  } catch (const BoundsViolation& e) {
    return fail("bounds_violation", e.what(), kExitCheckFailed);
  } catch (const Error& e) {
    return fail("error", e.what(), kExitConfig);
  }

  const std::vector<InvariantReport> reports = all_reports(bundle);
  const bool ok = all_pass(reports);
  const int code = ok ? kExitOk : kExitCheckFailed;

  try {
    const Metadata meta = encode_problem(spec);
    write_snapshot((dir / "u.snap").string(), "u", bundle.u, meta);
    write_snapshot((dir / "v.snap").string(), "v", bundle.v, meta);
    write_snapshot((dir / "w.snap").string(), "w", bundle.w, meta);
    write_snapshot((dir / "u0.snap").string(), "u0", bundle.background.u0, meta);
  } catch (const SnapshotError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  const ResidualNorms& res = bundle.residuals;
  summary << "status=converged\n";
  summary << "newton_iterations=" << res.newton_iterations << '\n';
  summary << "krylov_iterations=" << res.krylov_iterations << '\n';
  summary << "energy=" << sci(bundle.energy_history.back()) << '\n';
  summary << "residual.fourth_order=" << sci(res.fourth_order) << '\n';
  summary << "residual.first_equation=" << sci(res.first_equation) << '\n';
  summary << "residual.second_equation=" << sci(res.second_equation) << '\n';
  summary << "residual.w_definition=" << sci(res.w_definition) << '\n';
  summary << "exp_ustar.min=" << sci(bundle.exp_ustar().min()) << "\nexp_ustar.max=" << sci(bundle.exp_ustar().max())
          << '\n';
  summary << "v.min=" << sci(bundle.v.min()) << "\nv.max=" << sci(bundle.v.max()) << '\n';
  summary << "exit_code=" << code << '\n';
  summary << "[reports]\n";
  print_reports(summary, reports);

  out << "converged in " << res.newton_iterations << " Newton steps, residual " << sci(res.fourth_order) << '\n';
  print_reports(out, reports);
  out << (ok ? "all checks pass" : "CHECKS FAILED") << '\n';
  return code;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
              std::ostream& err) {
  const auto cfg = load_or_report(config_path, err);
  if (!cfg) return kExitConfig;
  const std::vector<double> q_list = cfg->q ? std::vector<double>{*cfg->q} : cfg->q_list;
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(cfg->output_dir);
  if (!prepare_dir(dir, err)) return kExitConfig;
  const ProblemSpec spec = cfg->problem();

  ConvergenceTable table;
  try {
    table = q_sweep(spec, q_list);
  } catch (const NoConvergence& e) {
    err << "limit equation: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const fs::path path = dir / "sweep.tsv";
  std::ofstream os(path);
  if (!os) {
    err << "cannot write " << path.string() << '\n';
    return kExitConfig;
  }
  os << "# mcsv q sweep\n";
  write_metadata(os, spec, "# ");
  os << "# q_list=" << sci_list(q_list) << '\n';
  os << "# limit_residual=" << sci(table.limit_residual) << '\n';
  os << "# limit_newton_iterations=" << table.limit_newton_iterations << '\n';
  os << "q\tstatus\tnewton_iterations\tresidual\td_eu\td_v\td_w\tq_d_v"
        "\tdu_h0\tdu_h1\tdu_h2\tdeu_h0\tdeu_h1\tdeu_h2\tdv_h0\tdv_h1\tdv_h2"
        "\tu_h0\tu_h1\tu_h2\tv_h0\tv_h1\tv_h2\tgradu\tbound_excess\tchecks\n";
  bool any_failed = false, any_check = false;
  for (const auto& r : table.rows) {
    os << sci(r.q) << '\t' << r.status << '\t' << r.newton_iterations << '\t' << sci(r.residual) << '\t'
       << sci(r.d_eu) << '\t' << sci(r.d_v) << '\t' << sci(r.d_w) << '\t' << sci(r.q * r.d_v);
    for (const double* h : {r.du_h, r.deu_h, r.dv_h, r.u_h, r.v_h})
      for (int k = 0; k < 3; ++k) os << '\t' << sci(h[k]);
    os << '\t' << sci(r.gradu) << '\t' << sci(r.bound_excess) << '\t'
       << (r.converged() ? (r.all_checks_pass ? "pass" : "FAIL") : "-") << '\n';
    if (!r.converged()) any_failed = true;
    if (r.converged() && !r.all_checks_pass) any_check = true;
    char line[200];
    std::snprintf(line, sizeof line, "q=%-10g %-16s d_eu=%.3e d_v=%.3e d_w=%.3e checks=%s", r.q, r.status.c_str(),
                  r.d_eu, r.d_v, r.d_w, r.converged() ? (r.all_checks_pass ? "pass" : "FAIL") : "-");
    out << line << '\n';
    if (!r.message.empty()) out << "  " << r.message << '\n';
  }
  out << "table written to " << path.string() << '\n';
  if (any_failed) return kExitNoConvergence;
  return any_check ? kExitCheckFailed : kExitOk;
}

int cmd_verify(const std::vector<std::string>& snapshot_paths, std::ostream& out, std::ostream& err) {
  if (snapshot_paths.empty()) {
    err << "verify: no snapshots given\n";
    return kExitConfig;
  }
  std::vector<Snapshot> snaps;
  try {
    for (const auto& p : snapshot_paths) snaps.push_back(read_snapshot(p));
  } catch (const SnapshotError& e) {
    err << "verify: " << e.what() << '\n';
    return kExitConfig;
  }
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    if (!(snaps[k].grid == snaps[0].grid)) {
      err << "verify: snapshots live on different grids\n";
      return kExitConfig;
    }
    if (snaps[k].meta != snaps[0].meta) {
      err << "verify: snapshots describe different problems\n";
      return kExitConfig;
    }
  }
  const Snapshot* u = nullptr;
  const Snapshot* v = nullptr;
  const Snapshot* w = nullptr;
  const Snapshot* u0 = nullptr;
  for (const auto& s : snaps) {
    const Snapshot** slot = s.field == "u" ? &u : s.field == "v" ? &v : s.field == "w" ? &w : s.field == "u0" ? &u0
                                                                                                             : nullptr;
    if (!slot) {
      err << "verify: unknown field '" << s.field << "'\n";
      return kExitConfig;
    }
    if (*slot) {
      err << "verify: field '" << s.field << "' given twice\n";
      return kExitConfig;
    }
    *slot = &s;
  }
  if (!u || !v || !w) {
    err << "verify: need the u, v and w snapshots of one solve\n";
    return kExitConfig;
  }

  SolutionBundle bundle;
  try {
    bundle.spec = decode_problem(snaps[0].meta);
    bundle.background = compute_u0(bundle.spec.vortices, bundle.spec.grid);
  } catch (const Error& e) {
    err << "verify: " << e.what() << '\n';
    return kExitConfig;
  }
  if (u0) {
    const double scale = std::max(1.0, sup_norm(bundle.background.u0));
    if (sup_norm(u0->data - bundle.background.u0) > 1e-12 * scale) {
      err << "verify: stored u0 does not match the vortex data\n";
      return kExitConfig;
    }
  }
  bundle.q = bundle.spec.q;
  bundle.u = u->data;
  bundle.v = v->data;
  bundle.w = w->data;

  std::vector<InvariantReport> reports;
  try {
    reports = all_reports(bundle);
  } catch (const Error& e) {
    err << "verify: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  print_reports(out, reports);
  const bool ok = all_pass(reports);
  out << (ok ? "all checks pass" : "CHECKS FAILED") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace mcsv
