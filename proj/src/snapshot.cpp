#include "mcsv/snapshot.hpp"

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mcsv/errors.hpp"

namespace mcsv {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'S', 'V', 'S', 'N', 'A', 'P'};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + fmt(xs[k]);
  return out;
}

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t k = 0; k < sizeof(U); ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(p[k]) << (8 * k);
  return v;
}

const std::string& need(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw SnapshotError("snapshot metadata lacks '" + key + "'");
  return it->second;
}

double to_double(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE)
    throw SnapshotError("snapshot metadata '" + key + "' is not a number: '" + text + "'");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(to_double(key, tok));
  return out;
}

}  // namespace

Metadata encode_problem(const ProblemSpec& spec) {
  Metadata m;
  const NonlinearityModel& model = spec.model;
  m.emplace_back("grid.length", fmt(spec.grid.length));
  m.emplace_back("model.name", model.name());
  m.emplace_back("model.s", fmt(model.s()));
  m.emplace_back("model.threshold", fmt(model.threshold()));
  if (model.kind() == NonlinearityModel::Kind::Custom) {
    m.emplace_back("model.table_t", join(model.table_t()));
    m.emplace_back("model.table_f", join(model.table_f()));
  }
  m.emplace_back("vortices.sigma_cells", fmt(spec.vortices.sigma_cells));
  std::string pts;
  for (const Vortex& p : spec.vortices.points)
    pts += (pts.empty() ? "" : ";") + fmt(p.x) + " " + fmt(p.y) + " " + std::to_string(p.multiplicity);
  m.emplace_back("vortices.points", pts);
  m.emplace_back("q", fmt(spec.q));
  m.emplace_back("tol.newton_tol", fmt(spec.tol.newton_tol));
  m.emplace_back("tol.krylov_tol", fmt(spec.tol.krylov_tol));
  m.emplace_back("tol.max_newton_iters", std::to_string(spec.tol.max_newton_iters));
  m.emplace_back("tol.max_krylov_iters", std::to_string(spec.tol.max_krylov_iters));
  m.emplace_back("tol.bound_tol", fmt(spec.tol.bound_tol));
  return m;
}

ProblemSpec decode_problem(const std::map<std::string, std::string>& meta) {
  ProblemSpec spec;
  spec.grid.n = static_cast<int>(to_double("N", need(meta, "N")));
  spec.grid.length = to_double("grid.length", need(meta, "grid.length"));
  const std::string& name = need(meta, "model.name");
  const double s = to_double("model.s", need(meta, "model.s"));
  const double threshold = to_double("model.threshold", need(meta, "model.threshold"));
  try {
    if (name == "u1") {
      spec.model = NonlinearityModel::u1(s, threshold);
    } else if (name == "cp1") {
      spec.model = NonlinearityModel::cp1(s, threshold);
    } else if (name == "custom") {
      spec.model = NonlinearityModel::custom(to_list("model.table_t", need(meta, "model.table_t")),
                                             to_list("model.table_f", need(meta, "model.table_f")), s, threshold);
    } else {
      throw SnapshotError("snapshot metadata names unknown model '" + name + "'");
    }
  } catch (const PreconditionViolated& e) {
    throw SnapshotError(std::string("snapshot model data invalid: ") + e.what());
  }
  spec.vortices.sigma_cells = to_double("vortices.sigma_cells", need(meta, "vortices.sigma_cells"));
  std::stringstream pts(need(meta, "vortices.points"));
  for (std::string item; std::getline(pts, item, ';');) {
    std::istringstream in(item);
    std::string x, y;
    int mult = 0;
    if (!(in >> x >> y >> mult)) throw SnapshotError("snapshot metadata has a malformed vortex '" + item + "'");
    spec.vortices.points.push_back({to_double("vortices.points", x), to_double("vortices.points", y), mult});
  }
  spec.q = to_double("q", need(meta, "q"));
  spec.tol.newton_tol = to_double("tol.newton_tol", need(meta, "tol.newton_tol"));
  spec.tol.krylov_tol = to_double("tol.krylov_tol", need(meta, "tol.krylov_tol"));
  spec.tol.max_newton_iters = static_cast<int>(to_double("tol.max_newton_iters", need(meta, "tol.max_newton_iters")));
  spec.tol.max_krylov_iters = static_cast<int>(to_double("tol.max_krylov_iters", need(meta, "tol.max_krylov_iters")));
  spec.tol.bound_tol = to_double("tol.bound_tol", need(meta, "tol.bound_tol"));
  try {
    spec.validate();
  } catch (const PreconditionViolated& e) {
    throw SnapshotError(std::string("snapshot problem data invalid: ") + e.what());
  }
  return spec;
}

void write_snapshot(const std::string& path, const std::string& field, const ScalarField& data,
                    const Metadata& meta) {
  std::string text = "field=" + field + "\n";
  for (const auto& [k, v] : meta) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos)
      throw SnapshotError("snapshot metadata entry '" + k + "' cannot be encoded");
    text += k + "=" + v + "\n";
  }
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.grid().n));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 8 * data.size());
  for (double v : data.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw SnapshotError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw SnapshotError("failed writing '" + path + "'");
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SnapshotError("cannot open snapshot '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  constexpr std::size_t header = sizeof kMagic + 12;
  if (bytes.size() < header || std::memcmp(p, kMagic, sizeof kMagic) != 0)
    throw SnapshotError("'" + path + "' is not a field snapshot");
  const auto version = get_le<std::uint32_t>(p + 8);
  if (version != kSnapshotVersion)
    throw SnapshotError("'" + path + "' has unsupported version " + std::to_string(version));
  const auto n = get_le<std::uint32_t>(p + 12);
  const auto mlen = get_le<std::uint32_t>(p + 16);
  if (n < 8 || n > 65536 || n % 2 != 0) throw SnapshotError("'" + path + "' has invalid N " + std::to_string(n));
  const std::size_t count = static_cast<std::size_t>(n) * n;
  if (bytes.size() != header + mlen + 8 * count) throw SnapshotError("'" + path + "' is truncated or has trailing data");

  Snapshot snap;
  std::istringstream text(bytes.substr(header, mlen));
  for (std::string line; std::getline(text, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SnapshotError("'" + path + "' has a malformed metadata line");
    const std::string key = line.substr(0, eq);
    if (key == "field")
      snap.field = line.substr(eq + 1);
    else
      snap.meta[key] = line.substr(eq + 1);
  }
  if (snap.field.empty()) throw SnapshotError("'" + path + "' does not name its field");
  snap.meta["N"] = std::to_string(n);
  const auto len_it = snap.meta.find("grid.length");
  snap.grid.n = static_cast<int>(n);
  snap.grid.length = len_it == snap.meta.end() ? 1.0 : to_double("grid.length", len_it->second);
  try {
    snap.grid.validate();
  } catch (const PreconditionViolated& e) {
    throw SnapshotError("'" + path + "': " + e.what());
  }

  std::vector<double> values(count);
  const unsigned char* d = p + header + mlen;
  for (std::size_t k = 0; k < count; ++k) values[k] = std::bit_cast<double>(get_le<std::uint64_t>(d + 8 * k));
  snap.data = ScalarField(snap.grid, std::move(values));
  return snap;
}

}  // namespace mcsv
