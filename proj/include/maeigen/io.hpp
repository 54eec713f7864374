#pragma once

// Run configuration, file formats and the command implementations behind the
// ma_eigen executable. Commands return process exit codes:
//   0 success, 1 input error, 2 non-convergence, 3 failed check.

#include "maeigen/error.hpp"
#include "maeigen/functionals.hpp"
#include "maeigen/geometry.hpp"
#include "maeigen/iteration.hpp"
#include "maeigen/oracles.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace maeigen::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr int kSchema = 1;

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2, kCheckFailed = 3 };

/// ValidationError that remembers which configuration field was rejected.
class FieldError : public Error {
 public:
  FieldError(std::string field, std::string reason)
      : Error(ErrorCode::ValidationError, field + ": " + reason),
        field_(std::move(field)),
        reason_(std::move(reason)) {}
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string field_, reason_;
};

// ---------------------------------------------------------------------------
// Configuration

struct DomainSpec {
  enum class Kind { Square, Ngon, Polygon };
  Kind kind = Kind::Square;
  double side = 1.0;
  int m = 0;
  double radius = 0.0;
  std::vector<Point2> vertices;

  geometry::ConvexPolygon build() const {
    switch (kind) {
      case Kind::Square: return geometry::axis_square(side);
      case Kind::Ngon: return geometry::regular_ngon(m, radius);
      case Kind::Polygon: return geometry::build_polygon(vertices);
    }
    return geometry::axis_square(side);
  }

  std::string label() const {
    std::ostringstream s;
    switch (kind) {
      case Kind::Square: s << "square:" << side; break;
      case Kind::Ngon: s << "ngon:" << m << ":" << radius; break;
      case Kind::Polygon: s << "polygon:" << vertices.size(); break;
    }
    return s.str();
  }

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct CheckSpec {
  std::string name;
  double slack = 0.0;
  friend bool operator==(const CheckSpec&, const CheckSpec&) = default;
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{
      "aleksandrov",      "reverse_aleksandrov",  "nibp",       "rate_chain", "energy_monotone",
      "pairing_monotone", "rayleigh_lower_bound", "norm_bound", "stationarity"};
  return names;
}

struct RunConfig {
  DomainSpec domain;
  double h = 0.125;
  iteration::SchemeConfig scheme;
  std::uint64_t seed = 0;
  std::vector<CheckSpec> checks;
  bool timing = false;
  std::string out = "run";
};

inline bool same_solver(const dirichlet::SolverConfig& a, const dirichlet::SolverConfig& b) {
  return a.mass_tolerance == b.mass_tolerance && a.max_sweeps == b.max_sweeps &&
         a.per_node_root_tolerance == b.per_node_root_tolerance &&
         a.newton_acceleration == b.newton_acceleration && a.newton_damping == b.newton_damping &&
         a.newton_damping_floor == b.newton_damping_floor;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  const auto &s = a.scheme, &t = b.scheme;
  return a.domain == b.domain && a.h == b.h && a.seed == b.seed && a.checks == b.checks &&
         a.timing == b.timing && a.out == b.out && s.max_iterations == t.max_iterations &&
         s.rayleigh_rel_tolerance == t.rayleigh_rel_tolerance &&
         s.iterate_sup_tolerance == t.iterate_sup_tolerance && s.record_trace == t.record_trace &&
         s.sup_normalize == t.sup_normalize && s.initial == t.initial &&
         same_solver(s.solver, t.solver);
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw FieldError(path.empty() ? "config" : path, "must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw FieldError(path.empty() ? key : path + "." + key, "unknown field");
  }
}

inline double number(const Json& v, const std::string& field) {
  if (!v.is_number()) throw FieldError(field, "must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw FieldError(field, "must be finite");
  return x;
}

inline double positive(const Json& v, const std::string& field) {
  const double x = number(v, field);
  if (!(x > 0.0)) throw FieldError(field, "must be positive");
  return x;
}

inline long long integer(const Json& v, const std::string& field) {
  if (!v.is_number_integer()) throw FieldError(field, "must be an integer");
  return v.get<long long>();
}

inline bool boolean(const Json& v, const std::string& field) {
  if (!v.is_boolean()) throw FieldError(field, "must be true or false");
  return v.get<bool>();
}

inline Point2 point(const Json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 2) throw FieldError(field, "must be a pair [x, y]");
  return {number(v[0], field), number(v[1], field)};
}

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline DomainSpec parse_domain(const Json& j) {
  reject_unknown(j, "domain", {"square", "ngon", "polygon"});
  if (j.size() != 1) throw FieldError("domain", "must contain exactly one of square, ngon, polygon");
  DomainSpec d;
  if (j.contains("square")) {
    d.kind = DomainSpec::Kind::Square;
    d.side = positive(j["square"], "domain.square");
  } else if (j.contains("ngon")) {
    const auto& a = j["ngon"];
    if (!a.is_array() || a.size() != 2) throw FieldError("domain.ngon", "must be [m, radius]");
    d.kind = DomainSpec::Kind::Ngon;
    const long long m = integer(a[0], "domain.ngon");
    if (m < 3 || m > 100000) throw FieldError("domain.ngon", "vertex count must lie in [3, 100000]");
    d.m = static_cast<int>(m);
    d.radius = positive(a[1], "domain.ngon");
  } else {
    const auto& a = j["polygon"];
    if (!a.is_array()) throw FieldError("domain.polygon", "must be a list of [x, y] pairs");
    d.kind = DomainSpec::Kind::Polygon;
    for (const auto& p : a) d.vertices.push_back(point(p, "domain.polygon"));
  }
  d.build();  // geometry errors surface before any compute
  return d;
}

inline dirichlet::SolverConfig parse_solver(const Json& j) {
  reject_unknown(j, "scheme.solver",
                 {"mass_tolerance", "max_sweeps", "per_node_root_tolerance", "newton_acceleration",
                  "newton_damping", "newton_damping_floor"});
  dirichlet::SolverConfig s;
  const std::string p = "scheme.solver";
  if (j.contains("mass_tolerance")) s.mass_tolerance = positive(j["mass_tolerance"], p + ".mass_tolerance");
  if (j.contains("max_sweeps")) {
    const long long n = integer(j["max_sweeps"], p + ".max_sweeps");
    if (n < 1 || n > 100000000) throw FieldError(p + ".max_sweeps", "must lie in [1, 1e8]");
    s.max_sweeps = static_cast<int>(n);
  }
  if (j.contains("per_node_root_tolerance"))
    s.per_node_root_tolerance = positive(j["per_node_root_tolerance"], p + ".per_node_root_tolerance");
  if (j.contains("newton_acceleration"))
    s.newton_acceleration = boolean(j["newton_acceleration"], p + ".newton_acceleration");
  if (j.contains("newton_damping")) {
    s.newton_damping = positive(j["newton_damping"], p + ".newton_damping");
    if (s.newton_damping > 1.0) throw FieldError(p + ".newton_damping", "must not exceed 1");
  }
  if (j.contains("newton_damping_floor")) {
    s.newton_damping_floor = positive(j["newton_damping_floor"], p + ".newton_damping_floor");
    if (s.newton_damping_floor > s.newton_damping)
      throw FieldError(p + ".newton_damping_floor", "must not exceed newton_damping");
  }
  return s;
}

inline iteration::InitialData parse_initial(const Json& j, std::uint64_t& seed) {
  reject_unknown(j, "initial", {"kind", "seed", "affine_count", "point", "values"});
  iteration::InitialData d;
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw FieldError("initial.kind", "must be a string");
    try {
      d.kind = iteration::initial_kind_from(j["kind"].get<std::string>());
    } catch (const Error&) {
      throw FieldError("initial.kind", "must be one of cone, paraboloid, max_affine, vanishing, custom");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw FieldError("initial.seed", "must be a nonnegative integer");
    seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("affine_count")) {
    const long long m = integer(j["affine_count"], "initial.affine_count");
    if (m < 1 || m > 100000) throw FieldError("initial.affine_count", "must lie in [1, 100000]");
    d.affine_count = static_cast<int>(m);
  }
  if (j.contains("point")) d.point = point(j["point"], "initial.point");
  if (j.contains("values")) {
    if (!j["values"].is_array()) throw FieldError("initial.values", "must be a list of numbers");
    for (const auto& v : j["values"]) d.values.push_back(number(v, "initial.values"));
  }
  if (d.kind == iteration::InitialKind::Custom && d.values.empty())
    throw FieldError("initial.values", "required for custom initial data");
  return d;
}

inline double default_slack(const std::string& name, double h) {
  if (name == "energy_monotone") return 1e-9;
  return h;
}

inline std::vector<CheckSpec> parse_checks(const Json& j, double h) {
  if (!j.is_array()) throw FieldError("checks", "must be a list");
  std::vector<CheckSpec> out;
  for (const auto& c : j) {
    CheckSpec spec;
    if (c.is_string()) {
      spec.name = c.get<std::string>();
      spec.slack = default_slack(spec.name, h);
    } else {
      reject_unknown(c, "checks[]", {"name", "slack"});
      if (!c.contains("name") || !c["name"].is_string()) throw FieldError("checks[].name", "required string");
      spec.name = c["name"].get<std::string>();
      spec.slack = c.contains("slack") ? number(c["slack"], "checks[].slack") : default_slack(spec.name, h);
      if (spec.slack < 0.0) throw FieldError("checks[].slack", "must be nonnegative");
    }
    const auto& names = check_names();
    if (std::find(names.begin(), names.end(), spec.name) == names.end())
      throw FieldError("checks", "unknown check '" + spec.name + "'");
    out.push_back(spec);
  }
  return out;
}

}  // namespace detail

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    // Keep nlohmann's explanation only; the position is reported above.
    if (auto p = msg.find(": ", msg.find("parse error")); p != std::string::npos) msg = msg.substr(p + 2);
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }
}

inline RunConfig config_from_json(const Json& j) {
  detail::reject_unknown(j, "", {"domain", "h", "scheme", "initial", "checks", "timing", "out"});
  RunConfig c;
  if (!j.contains("domain")) throw FieldError("domain", "required");
  c.domain = detail::parse_domain(j["domain"]);
  if (!j.contains("h")) throw FieldError("h", "required");
  c.h = detail::positive(j["h"], "h");
  if (j.contains("scheme")) {
    const auto& s = j["scheme"];
    detail::reject_unknown(s, "scheme",
                           {"max_iterations", "rayleigh_rel_tolerance", "iterate_sup_tolerance",
                            "record_trace", "sup_normalize", "solver"});
    if (s.contains("max_iterations")) {
      const long long n = detail::integer(s["max_iterations"], "scheme.max_iterations");
      if (n < 1 || n > 1000000) throw FieldError("scheme.max_iterations", "must lie in [1, 1e6]");
      c.scheme.max_iterations = static_cast<int>(n);
    }
    if (s.contains("rayleigh_rel_tolerance"))
      c.scheme.rayleigh_rel_tolerance =
          detail::positive(s["rayleigh_rel_tolerance"], "scheme.rayleigh_rel_tolerance");
    if (s.contains("iterate_sup_tolerance"))
      c.scheme.iterate_sup_tolerance =
          detail::positive(s["iterate_sup_tolerance"], "scheme.iterate_sup_tolerance");
    if (s.contains("record_trace"))
      c.scheme.record_trace = detail::boolean(s["record_trace"], "scheme.record_trace");
    if (s.contains("sup_normalize"))
      c.scheme.sup_normalize = detail::boolean(s["sup_normalize"], "scheme.sup_normalize");
    if (s.contains("solver")) c.scheme.solver = detail::parse_solver(s["solver"]);
  }
  if (j.contains("initial")) c.scheme.initial = detail::parse_initial(j["initial"], c.seed);
  if (j.contains("checks")) c.checks = detail::parse_checks(j["checks"], c.h);
  if (j.contains("timing")) c.timing = detail::boolean(j["timing"], "timing");
  if (j.contains("out")) {
    if (!j["out"].is_string() || j["out"].get<std::string>().empty())
      throw FieldError("out", "must be a non-empty string");
    c.out = j["out"].get<std::string>();
  }
  return c;
}

inline RunConfig parse_config(std::string_view text) { return config_from_json(parse_json(text)); }

inline Json to_json(const RunConfig& c) {
  Json j;
  Json d = Json::object();
  switch (c.domain.kind) {
    case DomainSpec::Kind::Square: d["square"] = c.domain.side; break;
    case DomainSpec::Kind::Ngon: d["ngon"] = Json::array({c.domain.m, c.domain.radius}); break;
    case DomainSpec::Kind::Polygon: {
      Json v = Json::array();
      for (const auto& p : c.domain.vertices) v.push_back(Json::array({p.x, p.y}));
      d["polygon"] = v;
      break;
    }
  }
  j["domain"] = d;
  j["h"] = c.h;
  const auto& s = c.scheme;
  j["scheme"] = {{"max_iterations", s.max_iterations},
                 {"rayleigh_rel_tolerance", s.rayleigh_rel_tolerance},
                 {"iterate_sup_tolerance", s.iterate_sup_tolerance},
                 {"record_trace", s.record_trace},
                 {"sup_normalize", s.sup_normalize},
                 {"solver",
                  {{"mass_tolerance", s.solver.mass_tolerance},
                   {"max_sweeps", s.solver.max_sweeps},
                   {"per_node_root_tolerance", s.solver.per_node_root_tolerance},
                   {"newton_acceleration", s.solver.newton_acceleration},
                   {"newton_damping", s.solver.newton_damping},
                   {"newton_damping_floor", s.solver.newton_damping_floor}}}};
  Json init = {{"kind", iteration::to_string(s.initial.kind)}, {"seed", c.seed},
               {"affine_count", s.initial.affine_count}};
  if (s.initial.point) init["point"] = Json::array({s.initial.point->x, s.initial.point->y});
  if (!s.initial.values.empty()) init["values"] = s.initial.values;
  j["initial"] = init;
  Json checks = Json::array();
  for (const auto& k : c.checks) checks.push_back({{"name", k.name}, {"slack", k.slack}});
  j["checks"] = checks;
  j["timing"] = c.timing;
  j["out"] = c.out;
  return j;
}

inline std::string serialize_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a of the configuration with the output directory removed.
inline std::string config_hash(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("out");
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Files

/// Shortest representation that reads back to the same double.
inline std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, where + ": not a number '" + std::string(s) + "'");
  return x;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::ValidationError, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::ValidationError, "cannot write " + p.string());
  out << text;
}

inline const char* kTraceHeader = "k,R_k,sup_k,norm_k,E_k,t_k,residual_k,wall_ms";

/// Trace as CSV; wall_ms is left empty unless timing is requested so that
/// repeated runs produce identical files.
inline std::string trace_csv(const iteration::IterationTrace& t, bool timing) {
  std::string s = std::string(kTraceHeader) + "\n";
  for (const auto& r : t.rows) {
    s += std::to_string(r.k) + "," + fmt(r.rayleigh) + "," + fmt(r.sup) + "," + fmt(r.norm) + "," +
         fmt(r.energy) + "," + fmt(r.pairing) + "," + fmt(r.residual) + "," +
         (timing ? fmt(r.wall_ms) : std::string()) + "\n";
  }
  return s;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& text, std::string& header) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  if (!std::getline(in, header)) throw Error(ErrorCode::ParseError, "empty CSV");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline iteration::IterationTrace parse_trace_csv(const std::string& text) {
  std::string header;
  const auto rows = read_csv(text, header);
  if (header != kTraceHeader) throw Error(ErrorCode::ParseError, "trace.csv: unexpected header");
  iteration::IterationTrace t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i];
    const std::string where = "trace.csv row " + std::to_string(i + 2);
    if (c.size() != 8) throw Error(ErrorCode::ParseError, where + ": expected 8 columns");
    iteration::TraceRow r;
    r.k = static_cast<int>(parse_double(c[0], where));
    r.rayleigh = parse_double(c[1], where);
    r.sup = parse_double(c[2], where);
    r.norm = parse_double(c[3], where);
    r.energy = parse_double(c[4], where);
    r.pairing = parse_double(c[5], where);
    r.residual = parse_double(c[6], where);
    r.wall_ms = c[7].empty() ? 0.0 : parse_double(c[7], where);
    t.rows.push_back(r);
  }
  return t;
}

/// Node values as `x,y,<column>` rows in mesh order.
inline std::string nodes_csv(const Mesh& mesh, const std::vector<double>& v, const char* column) {
  std::string s = std::string("x,y,") + column + "\n";
  for (std::size_t i = 0; i < v.size(); ++i)
    s += fmt(mesh.nodes[i].x) + "," + fmt(mesh.nodes[i].y) + "," + fmt(v[i]) + "\n";
  return s;
}

inline NodeFunction parse_eigenfunction_csv(const MeshPtr& mesh, const std::string& text) {
  std::string header;
  const auto rows = read_csv(text, header);
  if (header != "x,y,u") throw Error(ErrorCode::ParseError, "eigenfunction.csv: unexpected header");
  if (rows.size() != mesh->num_nodes())
    throw Error(ErrorCode::MeshMismatch, "eigenfunction.csv node count differs from the mesh");
  std::vector<double> v(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "eigenfunction.csv row " + std::to_string(i + 2);
    if (rows[i].size() != 3) throw Error(ErrorCode::ParseError, where + ": expected 3 columns");
    const Point2 p{parse_double(rows[i][0], where), parse_double(rows[i][1], where)};
    if (norm(p - mesh->nodes[i]) > 1e-12 * std::max(1.0, mesh->domain.diameter()))
      throw Error(ErrorCode::MeshMismatch, where + ": node position differs from the mesh");
    v[i] = parse_double(rows[i][2], where);
  }
  return NodeFunction(mesh, std::move(v), true);
}

inline std::string profile_csv(const oracles::RadialProfile& p) {
  std::string s = "r,u\n";
  for (std::size_t j = 0; j < p.r.size(); ++j) s += fmt(p.r[j]) + "," + fmt(p.u[j]) + "\n";
  return s;
}

inline Json mesh_json(const Mesh& m) {
  Json nodes = Json::array(), tris = Json::array(), vertices = Json::array();
  for (const auto& p : m.nodes) nodes.push_back(Json::array({p.x, p.y}));
  for (const auto& t : m.triangles) tris.push_back(Json::array({t[0], t[1], t[2]}));
  for (const auto& p : m.domain.vertices()) vertices.push_back(Json::array({p.x, p.y}));
  return {{"schema", kSchema},
          {"polygon", vertices},
          {"h", m.h},
          {"interior_count", m.num_interior()},
          {"nodes", nodes},
          {"weights", m.weights},
          {"triangles", tris}};
}

inline Json mesh_stats(const Mesh& m) {
  return {{"nodes", m.num_nodes()},       {"interior", m.num_interior()},
          {"boundary", m.num_boundary()}, {"triangles", m.triangles.size()},
          {"h", m.h},                     {"area", m.domain.area()},
          {"diameter", m.domain.diameter()}};
}

// ---------------------------------------------------------------------------
// Checks on a finished run

struct CheckOutcome {
  oracles::CheckResult result;
  std::string skipped;  // non-empty when the check could not be evaluated
};

namespace detail {

inline void fold(oracles::CheckResult& acc, const oracles::CheckResult& c, long where) {
  acc.tolerance = c.tolerance;
  acc.observe(c.worst_margin, where);
}

}  // namespace detail

/// Evaluates one named check on the run's iterates, or on u_inf alone when the
/// iterates were not kept.
inline CheckOutcome evaluate_check(const CheckSpec& spec, const iteration::SchemeResult& res,
                                   std::uint64_t seed) {
  CheckOutcome out;
  auto& r = out.result;
  r.name = spec.name;
  const double lambda = res.lambda_estimate;
  std::vector<std::pair<long, const NodeFunction*>> iterates;
  for (std::size_t k = 1; k < res.iterates.size(); ++k)
    iterates.push_back({static_cast<long>(k), &res.iterates[k]});
  if (iterates.empty()) iterates.push_back({static_cast<long>(res.iterations), &res.u_inf});
  try {
    if (spec.name == "aleksandrov") {
      for (const auto& [k, u] : iterates) detail::fold(r, oracles::check_aleksandrov(*u), k);
    } else if (spec.name == "reverse_aleksandrov") {
      for (const auto& [k, u] : iterates)
        detail::fold(r, oracles::check_reverse_aleksandrov(*u, res.u_inf, lambda, spec.slack), k);
    } else if (spec.name == "nibp") {
      const auto mu_e = pl::ma_measure(res.u_inf);
      for (const auto& [k, u] : iterates) {
        const auto mu_u = pl::ma_measure(*u);
        detail::fold(r, oracles::check_nibp(*u, res.u_inf, spec.slack, &mu_u, &mu_e), k);
        detail::fold(r, oracles::check_nibp(res.u_inf, *u, spec.slack, &mu_e, &mu_u), k);
      }
    } else if (spec.name == "rate_chain") {
      r = oracles::check_rate_chain(res.trace, lambda, spec.slack);
    } else if (spec.name == "energy_monotone") {
      r = oracles::check_energy_monotone(res.trace, spec.slack);
    } else if (spec.name == "pairing_monotone") {
      r = oracles::check_pairing_monotone(res.trace, spec.slack);
    } else if (spec.name == "rayleigh_lower_bound") {
      r = oracles::check_rayleigh_lower_bound(res.trace, lambda, spec.slack);
    } else if (spec.name == "norm_bound") {
      r = oracles::check_norm_bound(res.trace, lambda, spec.slack);
    } else if (spec.name == "stationarity") {
      r = oracles::stationarity_check(res.u_inf, 4, 0.1, seed, spec.slack);
    }
    r.name = spec.name;
    r.finish();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TraceTooShort) throw;
    out.skipped = e.what();
    r.passed = true;
    r.worst_margin = 0.0;
  }
  return out;
}

inline Json check_json(const CheckOutcome& c) {
  Json j = {{"name", c.result.name},
            {"passed", c.result.passed},
            {"worst_margin", c.result.worst_margin},
            {"location", c.result.location},
            {"tolerance", c.result.tolerance}};
  if (!c.skipped.empty()) j["skipped"] = c.skipped;
  return j;
}

// ---------------------------------------------------------------------------
// Commands

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct RunOutcome {
  int exit_code = kOk;
  std::optional<iteration::SchemeResult> result;
  std::vector<CheckOutcome> checks;
  std::string diagnostic;
};

inline bool is_zero_rayleigh(const Error& e) {
  return e.code() == ErrorCode::DegenerateInitialData || e.code() == ErrorCode::ZeroInitialData ||
         e.code() == ErrorCode::ZeroRayleigh;
}

inline std::string input_diagnostic(const Error& e) {
  if (is_zero_rayleigh(e) && std::string(e.what()).find("zero Rayleigh quotient") == std::string::npos)
    return std::string("zero Rayleigh quotient: ") + e.what();
  return e.what();
}

/// mesh -> scheme -> checks, writing trace.csv, eigenfunction.csv and summary.json.
inline RunOutcome execute_run(const RunConfig& cfg, Streams io) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  RunOutcome out;
  auto fail = [&](int code, const std::string& msg) {
    out.exit_code = code;
    out.diagnostic = msg;
    io.err << "error: " << msg << "\n";
    return out;
  };

  MeshPtr mesh;
  try {
    mesh = geometry::build_mesh(cfg.domain.build(), cfg.h);
    out.result = iteration::run_scheme(mesh, cfg.scheme, cfg.seed);
  } catch (const iteration::SchemeFailure& f) {
    out.result = f.result();
  } catch (const dirichlet::SolveFailure& f) {
    return fail(kNotConverged, f.what());
  } catch (const Error& e) {
    return fail(kInputError, input_diagnostic(e));
  }

  const auto& res = *out.result;
  const fs::path dir(cfg.out);
  bool all_pass = true;
  for (const auto& spec : cfg.checks) {
    out.checks.push_back(evaluate_check(spec, res, cfg.seed));
    all_pass = all_pass && out.checks.back().result.passed;
  }

  Json summary;
  summary["schema"] = kSchema;
  summary["version"] = std::string(kVersion);
  summary["lambda_estimate"] = res.lambda_estimate;
  summary["iterations"] = res.iterations;
  summary["converged"] = res.converged;
  Json checks = Json::array();
  for (const auto& c : out.checks) checks.push_back(check_json(c));
  summary["checks"] = checks;
  summary["config"] = to_json(cfg);
  summary["config_hash"] = config_hash(cfg);
  summary["mesh"] = mesh_stats(*mesh);
  const auto& last = res.trace.rows.back();
  summary["final"] = {{"sup", last.sup}, {"norm", last.norm}, {"residual", last.residual}};
  summary["wall_ms"] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  try {
    write_file(dir / "trace.csv", trace_csv(res.trace, cfg.timing));
    write_file(dir / "eigenfunction.csv", nodes_csv(*mesh, res.u_inf.values, "u"));
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    return fail(kInputError, e.what());
  }

  io.out << "lambda_estimate " << fmt(res.lambda_estimate) << " iterations " << res.iterations
         << (res.converged ? " converged" : " not converged") << "\n";
  for (const auto& c : out.checks)
    io.out << "check " << c.result.name << " "
           << (!c.skipped.empty() ? "SKIP" : c.result.passed ? "PASS" : "FAIL") << " margin "
           << fmt(c.result.worst_margin) << "\n";
  if (!res.converged) return fail(kNotConverged, "no convergence after " + std::to_string(res.iterations) + " iterations");
  if (!all_pass) return fail(kCheckFailed, "one or more checks failed");
  return out;
}

inline int run_command(const RunConfig& cfg, Streams io) { return execute_run(cfg, io).exit_code; }

inline int mesh_command(const RunConfig& cfg, Streams io) {
  try {
    const auto mesh = geometry::build_mesh(cfg.domain.build(), cfg.h);
    write_file(fs::path(cfg.out) / "mesh.json", mesh_json(*mesh).dump() + "\n");
    io.out << mesh_stats(*mesh).dump() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

inline int oracle_command(double radius, double tol, const std::string& out_dir, Streams io) {
  try {
    const auto p = oracles::radial_eigen_oracle(radius, tol);
    write_file(fs::path(out_dir) / "profile.csv", profile_csv(p));
    io.out << "lambda " << fmt(p.lambda) << "\n";
    return kOk;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

/// Re-runs the checks recorded in <dir>/summary.json against the persisted
/// trace and eigenfunction.
inline int verify_command(const std::string& dir, Streams io) {
  try {
    const fs::path d(dir);
    const Json summary = parse_json(read_file(d / "summary.json"));
    if (!summary.contains("schema") || summary["schema"] != kSchema)
      throw Error(ErrorCode::ValidationError, "summary.json: unsupported schema");
    const RunConfig cfg = config_from_json(summary.at("config"));
    const auto mesh = geometry::build_mesh(cfg.domain.build(), cfg.h);
    iteration::SchemeResult res;
    res.trace = parse_trace_csv(read_file(d / "trace.csv"));
    res.u_inf = parse_eigenfunction_csv(mesh, read_file(d / "eigenfunction.csv"));
    res.lambda_estimate = summary.at("lambda_estimate").get<double>();
    res.iterations = summary.at("iterations").get<int>();
    res.converged = summary.at("converged").get<bool>();
    if (res.trace.size() != static_cast<std::size_t>(res.iterations) + 1)
      throw Error(ErrorCode::ValidationError, "trace length does not match the iteration count");
    if (res.trace.rows.back().rayleigh != res.lambda_estimate)
      throw Error(ErrorCode::ValidationError, "trace does not end at lambda_estimate");
    const double r = functionals::rayleigh(res.u_inf);
    const bool r_ok = std::abs(r - res.lambda_estimate) <= 1e-9 * res.lambda_estimate;
    io.out << "rayleigh " << (r_ok ? "PASS" : "FAIL") << " recomputed " << fmt(r) << "\n";
    bool ok = r_ok;
    for (const auto& spec : cfg.checks) {
      const auto c = evaluate_check(spec, res, cfg.seed);
      io.out << "check " << c.result.name << " "
             << (!c.skipped.empty() ? "SKIP" : c.result.passed ? "PASS" : "FAIL") << " margin "
             << fmt(c.result.worst_margin) << "\n";
      ok = ok && c.result.passed;
    }
    return ok ? kOk : kCheckFailed;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepConfig {
  RunConfig base;
  std::vector<DomainSpec> domains;
  std::vector<double> hs;
  std::vector<std::pair<iteration::InitialData, std::uint64_t>> initials;
  std::string out = "sweep";
};

inline SweepConfig parse_sweep(std::string_view text) {
  const Json j = parse_json(text);
  detail::reject_unknown(j, "", {"base", "grid", "out"});
  if (!j.contains("base")) throw FieldError("base", "required");
  if (!j.contains("grid")) throw FieldError("grid", "required");
  SweepConfig s;
  s.base = config_from_json(j["base"]);
  const auto& g = j["grid"];
  detail::reject_unknown(g, "grid", {"domain", "h", "initial"});
  auto list = [&](const char* key) -> const Json& {
    if (!g[key].is_array()) throw FieldError(std::string("grid.") + key, "must be a list");
    return g[key];
  };
  if (g.contains("domain"))
    for (const auto& d : list("domain")) s.domains.push_back(detail::parse_domain(d));
  if (g.contains("h"))
    for (const auto& h : list("h")) s.hs.push_back(detail::positive(h, "grid.h"));
  if (g.contains("initial"))
    for (const auto& i : list("initial")) {
      std::uint64_t seed = s.base.seed;
      auto init = detail::parse_initial(i, seed);
      s.initials.emplace_back(std::move(init), seed);
    }
  const bool empty = (g.contains("domain") && s.domains.empty()) || (g.contains("h") && s.hs.empty()) ||
                     (g.contains("initial") && s.initials.empty()) || g.empty();
  if (empty) throw FieldError("grid", "is empty");
  if (s.domains.empty()) s.domains.push_back(s.base.domain);
  if (s.hs.empty()) s.hs.push_back(s.base.h);
  if (s.initials.empty()) s.initials.emplace_back(s.base.scheme.initial, s.base.seed);
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw FieldError("out", "must be a string");
    s.out = j["out"].get<std::string>();
  }
  return s;
}

inline std::vector<RunConfig> sweep_cells(const SweepConfig& s) {
  std::vector<RunConfig> cells;
  for (const auto& d : s.domains)
    for (double h : s.hs)
      for (const auto& [init, seed] : s.initials) {
        RunConfig c = s.base;
        c.domain = d;
        c.h = h;
        c.scheme.initial = init;
        c.seed = seed;
        char name[32];
        std::snprintf(name, sizeof name, "cell_%03zu", cells.size());
        c.out = (fs::path(s.out) / name).string();
        // Slack defaults follow the cell's own h.
        for (auto& chk : c.checks)
          if (chk.slack == detail::default_slack(chk.name, s.base.h))
            chk.slack = detail::default_slack(chk.name, h);
        cells.push_back(std::move(c));
      }
  return cells;
}

inline int sweep_command(const SweepConfig& s, int workers, Streams io) {
  const auto cells = sweep_cells(s);
  std::vector<RunOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      std::ostringstream out, err;
      try {
        outcomes[i] = execute_run(cells[i], {out, err});
      } catch (const std::exception& e) {
        outcomes[i].exit_code = kInputError;
        outcomes[i].diagnostic = e.what();
      }
      std::lock_guard lock(log_mutex);
      io.out << fs::path(cells[i].out).filename().string() << " exit " << outcomes[i].exit_code << "\n";
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  std::string csv = "cell,config_hash,domain,h,initial,seed,exit_code,converged,lambda,iterations";
  for (const auto& c : s.base.checks) csv += ",margin_" + c.name;
  csv += "\n";
  int worst = kOk;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& o = outcomes[i];
    worst = std::max(worst, o.exit_code);
    csv += fs::path(c.out).filename().string() + "," + config_hash(c) + "," + c.domain.label() + "," +
           fmt(c.h) + "," + iteration::to_string(c.scheme.initial.kind) + "," + std::to_string(c.seed) +
           "," + std::to_string(o.exit_code) + ",";
    if (o.result) {
      csv += std::string(o.result->converged ? "true" : "false") + "," + fmt(o.result->lambda_estimate) +
             "," + std::to_string(o.result->iterations);
    } else {
      csv += "false,,";
    }
    for (std::size_t k = 0; k < s.base.checks.size(); ++k)
      csv += "," + (k < o.checks.size() && o.checks[k].skipped.empty() ? fmt(o.checks[k].result.worst_margin)
                                                                       : std::string());
    csv += "\n";
  }
  write_file(fs::path(s.out) / "runs.csv", csv);
  return worst;
}

inline int workers_from_env(int fallback = 1) {
  if (const char* v = std::getenv("MA_EIGEN_WORKERS")) {
    int n = 0;
    const auto r = std::from_chars(v, v + std::strlen(v), n);
    if (r.ec == std::errc() && n >= 1) return n;
  }
  return fallback;
}

}  // namespace maeigen::io
