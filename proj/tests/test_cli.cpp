#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mcsv/commands.hpp"
#include "mcsv/config.hpp"
#include "mcsv/errors.hpp"
#include "mcsv/snapshot.hpp"
#include "test_support.hpp"

using namespace mcsv;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text, const std::string& base = ".") {
  std::istringstream in(text);
  return parse_config(in, base);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcsv_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_after(const std::string& text, const std::string& marker) {
  std::vector<std::string> out;
  std::istringstream in(text.substr(text.find(marker) + marker.size()));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

const char* kNoVortex = "[model]\nname = cp1\ns = 0.5\n[grid]\nN = 32\n[solver]\nq = 5\n";
const char* kOneVortex = "[model]\nname = u1\n[vortices]\na = 0.5 0.5\n[grid]\nN = 64\nlength = 16\n[solver]\nq = 20\n";

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults and values") {
    const RunConfig c = parse(kOneVortex);
    CHECK(c.grid.n == 64);
    CHECK(c.grid.length == 16.0);
    CHECK(c.q.value() == 20.0);
    CHECK(c.vortices.points.size() == 1);
    CHECK(c.vortices.points[0].multiplicity == 1);
    CHECK(c.output_dir == "out");
    CHECK(c.problem().q == 20.0);
  }
  SUBCASE("physical constants for cp1") {
    const RunConfig c = parse("[model]\nname = cp1\nS = -0.5\n[grid]\nN = 32\n[solver]\nQ = 7\n");
    CHECK(c.model.s() == 0.5);
    CHECK(c.q.value() == 14.0);
    CHECK(config_error("[model]\nname = u1\nS = 1\n[grid]\nN = 32\n[solver]\nq = 5\n").find("model.S") !=
          std::string::npos);
  }
  SUBCASE("multiplicity and q_list") {
    const RunConfig c = parse(
        "[model]\nname = u1\n[vortices]\np = 0.2 0.3 2\n[grid]\nN = 64\nlength = 16\n[solver]\nq_list = 10, 20, 40\n");
    CHECK(c.vortices.points[0].multiplicity == 2);
    CHECK(c.q_list == std::vector<double>{10, 20, 40});
    CHECK(c.problem().q == 10.0);
  }
  SUBCASE("errors name the offending field") {
    CHECK(config_error("[model]\nname = u1\ncolour = red\n[grid]\nN = 32\n[solver]\nq = 5\n").find("model.colour") !=
          std::string::npos);
    CHECK(config_error("[model]\nname = u1\n[grid]\nN = 33\n[solver]\nq = 5\n").find("grid.N") != std::string::npos);
    CHECK(config_error("[model]\nname = u1\n[grid]\nN = 32\n[solver]\nq_list = 20, 10\n").find("ascending") !=
          std::string::npos);
    CHECK(config_error("[model]\nname = u1\n[grid]\nN = 32\n[solver]\nq = 5\nq_list = 5, 10\n") != "");
    CHECK(config_error("[model]\nname = u1\n[grid]\nN = 32\n[solver]\n") != "");
    CHECK(config_error("[model]\nname = custom\ns = 0.5\n[grid]\nN = 32\n[solver]\nq = 5\n").find("table") !=
          std::string::npos);
    CHECK(config_error("[model]\nname = cp2\n[grid]\nN = 32\n[solver]\nq = 5\n").find("model.name") !=
          std::string::npos);
    CHECK(config_error("[extra]\n[model]\nname = u1\n[grid]\nN = 32\n[solver]\nq = 5\n").find("extra") !=
          std::string::npos);
    CHECK(config_error("[model]\nname = u1\n[vortices]\na = 0.5\n[grid]\nN = 32\n[solver]\nq = 5\n")
              .find("vortices.a") != std::string::npos);
  }
  SUBCASE("ini syntax errors carry a line number") {
    const std::string msg = config_error("[model]\nname = u1\n[grid\nN = 32\n");
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("custom table models") {
  const fs::path dir = scratch("table");
  std::ofstream tab(dir / "f.txt");
  tab << "# t f\n";
  for (int k = 0; k <= 40; ++k) {
    const double t = 0.1 * k;
    tab << t << " " << (t - 1) / (t + 1) << "\n";
  }
  tab.close();
  const RunConfig c = parse("[model]\nname = custom\ns = 0.5\ntable = f.txt\n[grid]\nN = 32\n[solver]\nq = 5\n",
                            dir.string());
  CHECK(eval(c.model, 3.0).f == doctest::Approx(0.5).epsilon(1e-4));

  // Metadata round trip keeps the table.
  ProblemSpec spec = c.problem();
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : encode_problem(spec)) meta[k] = v;
  meta["N"] = std::to_string(spec.grid.n);  // normally taken from the snapshot header
  const ProblemSpec back = decode_problem(meta);
  CHECK(eval(back.model, 2.345).f == eval(spec.model, 2.345).f);
  CHECK(eval(back.model, 2.345).df == eval(spec.model, 2.345).df);
}

TEST_CASE("problem metadata round trips exactly") {
  ProblemSpec spec = testing::single_vortex(NonlinearityModel::cp1(0.3, 7.5), 1.0 / 3.0, 64);
  spec.vortices.points.push_back({0.1, 0.9, 2});
  spec.vortices.sigma_cells = 4.5;
  spec.tol.newton_tol = 3e-10;
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : encode_problem(spec)) meta[k] = v;
  meta["N"] = std::to_string(spec.grid.n);  // normally taken from the snapshot header
  const ProblemSpec back = decode_problem(meta);
  CHECK(back.q == spec.q);
  CHECK(back.grid.length == spec.grid.length);
  CHECK(back.model.s() == spec.model.s());
  CHECK(back.model.threshold() == spec.model.threshold());
  CHECK(back.vortices.sigma_cells == 4.5);
  REQUIRE(back.vortices.points.size() == 2);
  CHECK(back.vortices.points[1].x == 0.1);
  CHECK(back.vortices.points[1].multiplicity == 2);
  CHECK(back.tol.newton_tol == 3e-10);
  meta.erase("q");
  CHECK_THROWS_AS(decode_problem(meta), SnapshotError);
}

TEST_CASE("snapshot files") {
  const fs::path dir = scratch("snap");
  const GridSpec g{16, 1.0};
  std::mt19937_64 rng(1);
  const ScalarField f = testing::random_smooth(g, rng);
  const ProblemSpec spec = testing::no_vortex(NonlinearityModel::u1(), 5.0, 16);
  write_snapshot((dir / "f.snap").string(), "u", f, encode_problem(spec));

  const Snapshot s = read_snapshot((dir / "f.snap").string());
  CHECK(s.field == "u");
  CHECK(s.grid.n == 16);
  CHECK(s.meta.at("N") == "16");
  CHECK(sup_norm(s.data - f) == 0.0);

  const std::string bytes = read_text(dir / "f.snap");
  CHECK(bytes.substr(0, 8) == "MCSVSNAP");

  std::string bad = bytes;
  bad[0] = 'X';
  write_text(dir / "magic.snap", bad);
  CHECK_THROWS_AS(read_snapshot((dir / "magic.snap").string()), SnapshotError);
  write_text(dir / "short.snap", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_snapshot((dir / "short.snap").string()), SnapshotError);
  bad = bytes;
  bad[8] = 9;
  write_text(dir / "version.snap", bad);
  CHECK_THROWS_AS(read_snapshot((dir / "version.snap").string()), SnapshotError);
  CHECK_THROWS_AS(read_snapshot((dir / "missing.snap").string()), SnapshotError);
}

TEST_CASE("solve and verify") {
  const fs::path dir = scratch("solve");
  write_text(dir / "plain.ini", kNoVortex);
  write_text(dir / "one.ini", kOneVortex);
  std::ostringstream out, err;

  SUBCASE("no vortices") {
    CHECK(cmd_solve((dir / "plain.ini").string(), (dir / "plain").string(), out, err) == kExitOk);
    for (const char* f : {"u.snap", "v.snap", "w.snap", "u0.snap", "summary.txt"}) CHECK(fs::exists(dir / "plain" / f));
    CHECK(read_text(dir / "plain" / "summary.txt").find("status=converged") != std::string::npos);
  }

  SUBCASE("verify reproduces the stored reports, corruption is caught") {
    REQUIRE(cmd_solve((dir / "one.ini").string(), (dir / "one").string(), out, err) == kExitOk);
    const std::string o = (dir / "one").string();
    std::ostringstream vout;
    CHECK(cmd_verify({o + "/u.snap", o + "/v.snap", o + "/w.snap", o + "/u0.snap"}, vout, err) == kExitOk);
    const auto stored = lines_after(read_text(dir / "one" / "summary.txt"), "[reports]\n");
    const auto again = lines_after(vout.str(), "");
    REQUIRE(stored.size() >= 16);
    for (std::size_t k = 0; k < stored.size(); ++k) CHECK(stored[k] == again.at(k));

    Snapshot v = read_snapshot(o + "/v.snap");
    v.data[500] += 0.2;
    Metadata meta;
    for (const auto& [k, val] : v.meta)
      if (k != "N") meta.emplace_back(k, val);
    write_snapshot((dir / "v_bad.snap").string(), "v", v.data, meta);
    std::ostringstream bout;
    CHECK(cmd_verify({o + "/u.snap", (dir / "v_bad.snap").string(), o + "/w.snap"}, bout, err) == kExitCheckFailed);
    CHECK(bout.str().find("FAIL") != std::string::npos);

    // Missing field, and a field from another problem.
    CHECK(cmd_verify({o + "/u.snap", o + "/v.snap"}, bout, err) == kExitConfig);
    REQUIRE(cmd_solve((dir / "plain.ini").string(), (dir / "plain").string(), out, err) == kExitOk);
    CHECK(cmd_verify({o + "/u.snap", (dir / "plain" / "v.snap").string(), o + "/w.snap"}, bout, err) == kExitConfig);
  }

  SUBCASE("q below the bound") {
    write_text(dir / "tiny.ini", "[model]\nname = u1\n[vortices]\na = 0.5 0.5\n[grid]\nN = 64\nlength = 16\n[solver]\nq = 0.5\n");
    CHECK(cmd_solve((dir / "tiny.ini").string(), (dir / "tiny").string(), out, err) == kExitNoConvergence);
    CHECK(read_text(dir / "tiny" / "summary.txt").find("q_too_small") != std::string::npos);
  }

  SUBCASE("bad config") {
    write_text(dir / "bad.ini", "[model]\nname = u1\n[grid]\nN = 7\n[solver]\nq = 5\n");
    std::ostringstream e;
    CHECK(cmd_solve((dir / "bad.ini").string(), std::nullopt, out, e) == kExitConfig);
    CHECK(e.str().find("grid.N") != std::string::npos);
    CHECK(cmd_solve((dir / "nope.ini").string(), std::nullopt, out, e) == kExitConfig);
  }
}

TEST_CASE("sweep command") {
  const fs::path dir = scratch("sweep");
  std::ostringstream out, err;
  write_text(dir / "desc.ini", "[model]\nname = u1\n[grid]\nN = 32\n[solver]\nq_list = 20, 10\n");
  CHECK(cmd_sweep((dir / "desc.ini").string(), (dir / "desc").string(), out, err) == kExitConfig);
  CHECK(err.str().find("ascending") != std::string::npos);

  write_text(dir / "one.ini", "[model]\nname = cp1\ns = 0.5\n[grid]\nN = 32\n[solver]\nq_list = 5\n");
  CHECK(cmd_sweep((dir / "one.ini").string(), (dir / "one").string(), out, err) == kExitOk);
  const std::string tsv = read_text(dir / "one" / "sweep.tsv");
  CHECK(tsv.find("q\tstatus") != std::string::npos);
  CHECK(tsv.find("converged") != std::string::npos);
}

TEST_CASE("the executable") {
  const fs::path dir = scratch("exe");
  write_text(dir / "plain.ini", kNoVortex);
  const std::string exe = MCSV_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + " > " + (dir / "log.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("--help") == 0);
  CHECK(run("solve --config " + (dir / "plain.ini").string() + " --out " + (dir / "o").string()) == 0);
  const std::string o = (dir / "o").string();
  CHECK(run("verify " + o + "/u.snap " + o + "/v.snap " + o + "/w.snap") == 0);
  CHECK(run("solve") == 1);
  CHECK(run("frobnicate") == 1);
}
