#include "mcsv/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mcsv/errors.hpp"

namespace mcsv {

namespace pt = boost::property_tree;

namespace {

double parse_double(const std::string& field, const std::string& text) {
  std::istringstream in(text);
  double v = 0.0;
  in >> v;
  std::string rest;
  if (!in || (in >> rest)) throw ConfigError(field + ": expected a number, got '" + text + "'");
  return v;
}

long parse_int(const std::string& field, const std::string& text) {
  const double v = parse_double(field, text);
  if (v != std::floor(v)) throw ConfigError(field + ": expected an integer, got '" + text + "'");
  return static_cast<long>(v);
}

std::optional<std::string> get(const pt::ptree& tree, const std::string& key) {
  if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return *v;
  return std::nullopt;
}

double get_double(const pt::ptree& tree, const std::string& key, double fallback) {
  const auto v = get(tree, key);
  return v ? parse_double(key, *v) : fallback;
}

void reject_unknown(const pt::ptree& tree, const std::string& section, const std::vector<std::string>& known) {
  const auto sec = tree.get_child_optional(section);
  if (!sec) return;
  for (const auto& [key, _] : *sec)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(section + "." + key + ": unknown key");
}

std::vector<double> parse_list(const std::string& field, std::string text) {
  for (char& ch : text)
    if (ch == '[' || ch == ']' || ch == ',') ch = ' ';
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(field, tok));
  if (out.empty()) throw ConfigError(field + ": empty list");
  return out;
}

}  // namespace

ProblemSpec RunConfig::problem() const {
  ProblemSpec spec;
  spec.model = model;
  spec.vortices = vortices;
  spec.grid = grid;
  spec.tol = tol;
  spec.q = q ? *q : q_list.front();
  return spec;
}

NonlinearityModel load_custom_table(const std::string& path, double s, double threshold) {
  std::ifstream in(path);
  if (!in) throw ConfigError("model.table: cannot open '" + path + "'");
  std::vector<double> t, f;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    double a = 0.0, b = 0.0;
    if (!(ls >> a)) continue;
    if (!(ls >> b)) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 't f'");
    t.push_back(a);
    f.push_back(b);
  }
  try {
    return NonlinearityModel::custom(t, f, s, threshold);
  } catch (const PreconditionViolated& e) {
    throw ConfigError(std::string("model.table: ") + e.what());
  }
}

RunConfig parse_config(std::istream& in, const std::string& base_dir) {
  // The ini parser drops empty sections, so headers are checked on the raw text.
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto b = line.find_first_not_of(" \t");
      if (b == std::string::npos || line[b] != '[') continue;
      const auto e = line.find(']', b);
      if (e == std::string::npos) continue;
      const std::string name = line.substr(b + 1, e - b - 1);
      if (name != "model" && name != "vortices" && name != "grid" && name != "solver" && name != "output")
        throw ConfigError(name + ": unknown section");
    }
  }
  pt::ptree tree;
  try {
    std::istringstream body(text);
    pt::ini_parser::read_ini(body, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, _] : tree)
    if (section != "model" && section != "vortices" && section != "grid" && section != "solver" &&
        section != "output")
      throw ConfigError(section + ": unknown section");
  reject_unknown(tree, "model", {"name", "s", "S", "threshold", "table"});
  reject_unknown(tree, "grid", {"N", "length", "sigma"});
  reject_unknown(tree, "solver", {"q", "Q", "q_list", "newton_tol", "krylov_tol", "max_newton_iters",
                                  "max_krylov_iters", "bound_tol"});
  reject_unknown(tree, "output", {"dir"});

  RunConfig cfg;

  // [model]
  const std::string name = get(tree, "model.name").value_or("u1");
  const auto s_text = get(tree, "model.s");
  const auto big_s = get(tree, "model.S");
  if (s_text && big_s) throw ConfigError("model.S: give either s or S, not both");
  if (big_s && name != "cp1") throw ConfigError("model.S: only meaningful for the cp1 model");
  const double threshold = get_double(tree, "model.threshold", 0.0);
  if (threshold < 0.0) throw ConfigError("model.threshold: must be positive");
  if (get(tree, "model.table") && name != "custom") throw ConfigError("model.table: only used by the custom model");
  try {
    if (name == "u1") {
      cfg.model = NonlinearityModel::u1(s_text ? parse_double("model.s", *s_text) : 1.0, threshold);
    } else if (name == "cp1") {
      double s = 0.5;
      if (s_text) s = parse_double("model.s", *s_text);
      if (big_s) s = -parse_double("model.S", *big_s);
      cfg.model = NonlinearityModel::cp1(s, threshold);
    } else if (name == "custom") {
      const auto table = get(tree, "model.table");
      if (!table) throw ConfigError("model.table: required for the custom model");
      if (!s_text) throw ConfigError("model.s: required for the custom model");
      std::filesystem::path p(*table);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      cfg.model = load_custom_table(p.string(), parse_double("model.s", *s_text), threshold);
    } else {
      throw ConfigError("model.name: expected u1, cp1 or custom, got '" + name + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionViolated& e) {
    throw ConfigError(std::string("model.s: ") + e.what());
  }

  // [grid]
  cfg.grid.n = static_cast<int>(parse_int("grid.N", get(tree, "grid.N").value_or("64")));
  cfg.grid.length = get_double(tree, "grid.length", 1.0);
  if (cfg.grid.n < 8 || cfg.grid.n % 2 != 0) throw ConfigError("grid.N: must be an even integer >= 8");
  if (!(cfg.grid.length > 0.0) || !std::isfinite(cfg.grid.length)) throw ConfigError("grid.length: must be positive");
  cfg.vortices.sigma_cells = get_double(tree, "grid.sigma", 4.0);
  if (cfg.vortices.sigma_cells < 2.0) throw ConfigError("grid.sigma: must be at least 2 grid cells");

  // [vortices]
  if (const auto sec = tree.get_child_optional("vortices")) {
    for (const auto& [key, node] : *sec) {
      const std::string field = "vortices." + key;
      std::istringstream ls(node.data());
      std::vector<std::string> tok;
      for (std::string t; ls >> t;) tok.push_back(t);
      if (tok.size() != 2 && tok.size() != 3) throw ConfigError(field + ": expected 'x y [multiplicity]'");
      Vortex v;
      v.x = parse_double(field, tok[0]);
      v.y = parse_double(field, tok[1]);
      v.multiplicity = tok.size() == 3 ? static_cast<int>(parse_int(field, tok[2])) : 1;
      if (!(v.x >= 0.0 && v.x < 1.0 && v.y >= 0.0 && v.y < 1.0))
        throw ConfigError(field + ": position must lie in [0,1)^2");
      if (v.multiplicity < 1) throw ConfigError(field + ": multiplicity must be a positive integer");
      for (const auto& other : cfg.vortices.points)
        if (other.x == v.x && other.y == v.y) throw ConfigError(field + ": duplicate vortex position");
      cfg.vortices.points.push_back(v);
    }
  }

  // [solver]
  const auto q_text = get(tree, "solver.q");
  const auto big_q = get(tree, "solver.Q");
  const auto list_text = get(tree, "solver.q_list");
  if (big_q && name != "cp1") throw ConfigError("solver.Q: only meaningful for the cp1 model");
  if (static_cast<int>(q_text.has_value()) + static_cast<int>(big_q.has_value()) + list_text.has_value() != 1)
    throw ConfigError("solver: give exactly one of q, Q or q_list");
  if (q_text) cfg.q = parse_double("solver.q", *q_text);
  if (big_q) cfg.q = 2.0 * parse_double("solver.Q", *big_q);
  if (cfg.q && !(*cfg.q > 0.0 && std::isfinite(*cfg.q))) throw ConfigError("solver.q: must be positive");
  if (list_text) {
    cfg.q_list = parse_list("solver.q_list", *list_text);
    for (std::size_t k = 0; k < cfg.q_list.size(); ++k) {
      if (!(cfg.q_list[k] > 0.0 && std::isfinite(cfg.q_list[k])))
        throw ConfigError("solver.q_list: entries must be positive");
      if (k > 0 && !(cfg.q_list[k] > cfg.q_list[k - 1])) throw ConfigError("solver.q_list: q_list must be ascending");
    }
  }
  cfg.tol.newton_tol = get_double(tree, "solver.newton_tol", cfg.tol.newton_tol);
  cfg.tol.krylov_tol = get_double(tree, "solver.krylov_tol", cfg.tol.krylov_tol);
  cfg.tol.bound_tol = get_double(tree, "solver.bound_tol", cfg.tol.bound_tol);
  if (const auto v = get(tree, "solver.max_newton_iters"))
    cfg.tol.max_newton_iters = static_cast<int>(parse_int("solver.max_newton_iters", *v));
  if (const auto v = get(tree, "solver.max_krylov_iters"))
    cfg.tol.max_krylov_iters = static_cast<int>(parse_int("solver.max_krylov_iters", *v));
  if (!(cfg.tol.newton_tol > 0.0)) throw ConfigError("solver.newton_tol: must be positive");
  if (!(cfg.tol.krylov_tol > 0.0 && cfg.tol.krylov_tol < 1.0)) throw ConfigError("solver.krylov_tol: must lie in (0, 1)");
  if (cfg.tol.max_newton_iters < 1) throw ConfigError("solver.max_newton_iters: must be >= 1");
  if (cfg.tol.max_krylov_iters < 1) throw ConfigError("solver.max_krylov_iters: must be >= 1");

  cfg.output_dir = get(tree, "output.dir").value_or("out");

  try {
    cfg.problem().validate();
  } catch (const PreconditionViolated& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const auto dir = std::filesystem::path(path).parent_path();
  try {
    return parse_config(in, dir.empty() ? "." : dir.string());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace mcsv
