#include "pimc/config.hpp"

#include "pimc/oracle.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

namespace pimc {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

std::string format_vec(const Vec3& v) {
  return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
}

Vec3 parse_vec(const std::string& key, const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(parse_double(key, trim(item)));
  if (parts.size() != 3) throw ConfigError(key + ": expected three comma-separated numbers");
  return Vec3(parts[0], parts[1], parts[2]);
}

struct Field {
  const char* name;
  const char* help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define PIMC_DOUBLE(key, member, help)                                  \
  Field {                                                              \
    key, help, [](const RunConfig& c) { return format_double(c.member); }, \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(key, v); } \
  }
#define PIMC_INT(key, member, type, help)                                     \
  Field {                                                                     \
    key, help, [](const RunConfig& c) { return std::to_string(c.member); },   \
        [](RunConfig& c, const std::string& v) { c.member = parse_int<type>(key, v); } \
  }
#define PIMC_STRING(key, member, help)                           \
  Field {                                                        \
    key, help, [](const RunConfig& c) { return c.member; },      \
        [](RunConfig& c, const std::string& v) { c.member = v; } \
  }
#define PIMC_VEC(key, member, help)                                     \
  Field {                                                              \
    key, help, [](const RunConfig& c) { return format_vec(c.member); }, \
        [](RunConfig& c, const std::string& v) { c.member = parse_vec(key, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      PIMC_STRING("problem", problem, "electrodes | annulus | robin | dirichlet"),
      PIMC_VEC("domain.anomaly_center", anomaly_center, "centre of the spherical anomaly"),
      PIMC_DOUBLE("domain.anomaly_radius", anomaly_radius, "anomaly radius, 0 for none"),
      PIMC_INT("domain.electrodes", electrode_count, int, "number of caps on the y-z circle"),
      PIMC_DOUBLE("domain.cap_radius", cap_radius, "geodesic cap radius"),
      PIMC_DOUBLE("domain.contact_impedance", contact_impedance, "z_l, the same on every electrode"),
      PIMC_STRING("data.phi1", data, "cos4theta | constant:<V> | zero"),
      PIMC_STRING("data.theta", theta, "yz (atan2(y, z)) | polar (arccos z)"),
      PIMC_DOUBLE("oracle.r0", oracle_r0, "annulus inner radius"),
      PIMC_DOUBLE("oracle.g", oracle_g, "annulus outer flux"),
      PIMC_INT("oracle.degree", oracle_degree, int, "Robin oracle harmonic degree"),
      PIMC_DOUBLE("oracle.kappa", oracle_kappa, "Robin oracle coefficient 1/z"),
      PIMC_STRING("oracle.polynomial", oracle_polynomial, "Dirichlet oracle harmonic polynomial"),
      PIMC_VEC("point", point, "evaluation point for solve-point"),
      PIMC_INT("solver.n_paths", walk.n_paths, long, "N; for map, paths per electrode"),
      PIMC_INT("solver.max_boundary_events", walk.max_boundary_events, int, "NP"),
      PIMC_DOUBLE("solver.epsilon", walk.epsilon, "local-time shell width"),
      PIMC_DOUBLE("solver.delta_x", walk.delta_x, "walk radius inside the shell"),
      PIMC_DOUBLE("solver.absorption_shell", walk.absorption_shell, "Dirichlet termination shell"),
      PIMC_INT("solver.max_steps", walk.max_steps, long, "per-path step cap"),
      PIMC_INT("solver.seed", walk.seed, std::uint64_t, "master seed"),
      PIMC_INT("solver.workers", workers, unsigned, "threads, 0 = all cores"),
      Field{"solver.scoring", "beneath | next_exit",
            [](const RunConfig& c) {
              return std::string(c.walk.scoring == LocalTimeScoring::Beneath ? "beneath" : "next_exit");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "beneath") {
                c.walk.scoring = LocalTimeScoring::Beneath;
              } else if (v == "next_exit") {
                c.walk.scoring = LocalTimeScoring::NextExit;
              } else {
                throw ConfigError("solver.scoring: expected beneath or next_exit, got '" + v + "'");
              }
            }},
      PIMC_DOUBLE("solver.calibration_robin", calibration.robin, "local-time factor of the Robin term"),
      PIMC_DOUBLE("solver.calibration_neumann", calibration.neumann, "local-time factor of the Neumann term"),
      PIMC_INT("solver.quadrature_rings", quadrature.rings, int, "radial nodes per electrode"),
      PIMC_INT("solver.quadrature_sectors", quadrature.sectors, int, "azimuthal nodes per electrode"),
      PIMC_INT("bem.depth", mesh.depth, int, "icosphere subdivision depth"),
      PIMC_INT("bem.m1", mesh.m1, int, "rings in layer 1"),
      PIMC_INT("bem.m2", mesh.m2, int, "rings in layer 2"),
      PIMC_INT("bem.m3", mesh.m3, int, "rings in layer 3"),
      PIMC_INT("bem.m4", mesh.m4, int, "rings in layer 4"),
      PIMC_DOUBLE("bem.alpha", mesh.alpha, "ring width ratio"),
      PIMC_INT("bem.sectors", mesh.sectors, int, "azimuthal divisions of a patch"),
      PIMC_DOUBLE("bem.r1", mesh.r1, "outer radius of layer 1"),
      PIMC_DOUBLE("bem.r2", mesh.r2, "outer radius of layer 3"),
      PIMC_DOUBLE("bem.extended_radius", mesh.extended_radius, "patch radius r_e"),
      PIMC_DOUBLE("bem.near_factor", bem.near_factor, "adaptive integration within this many diameters"),
      PIMC_INT("bem.dense_limit", bem.dense_limit, long, "largest system solved by LU"),
      PIMC_DOUBLE("bem.gmres_tolerance", bem.gmres_tolerance, "relative residual target"),
      PIMC_INT("bem.gmres_restart", bem.gmres_restart, int, "Krylov subspace size"),
      PIMC_STRING("bem.mesh_in", mesh_in, "read the mesh from this file instead of building it"),
      PIMC_STRING("bem.mesh_out", mesh_out, "write the mesh to this file"),
      PIMC_STRING("output.format", format, "table | json | csv"),
      PIMC_STRING("output.path", out, "write the report here instead of stdout"),
  };
  return all;
}

#undef PIMC_DOUBLE
#undef PIMC_INT
#undef PIMC_STRING
#undef PIMC_VEC

bool excluded_from_hash(const std::string& key) {
  return key == "solver.workers" || key.rfind("output.", 0) == 0;
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const Field& f : fields()) out.push_back({f.name, f.help});
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.name) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.name) + " = " + f.get(config) + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Field& f : fields()) {
    if (excluded_from_hash(f.name)) continue;
    const std::string line = std::string(f.name) + " = " + f.get(config) + "\n";
    for (unsigned char c : line) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool RunConfig::operator==(const RunConfig& other) const { return echo_config(*this) == echo_config(other); }

namespace {

double constant_value(const std::string& data) {
  return parse_double("data.phi1", data.substr(std::string("constant:").size()));
}

}  // namespace

void RunConfig::validate() const {
  if (problem != "electrodes" && problem != "annulus" && problem != "robin" && problem != "dirichlet") {
    throw ConfigError("problem: expected electrodes, annulus, robin or dirichlet, got '" + problem + "'");
  }
  if (data != "cos4theta" && data != "zero" && data.rfind("constant:", 0) != 0) {
    throw ConfigError("data.phi1: expected cos4theta, zero or constant:<V>, got '" + data + "'");
  }
  if (data.rfind("constant:", 0) == 0) constant_value(data);
  if (theta != "yz" && theta != "polar") throw ConfigError("data.theta: expected yz or polar");
  if (format != "table" && format != "json" && format != "csv") {
    throw ConfigError("output.format: expected table, json or csv, got '" + format + "'");
  }
  if (electrode_count < 1) throw ConfigError("domain.electrodes: must be >= 1");
  if (quadrature.rings < 1 || quadrature.sectors < 1) {
    throw ConfigError("solver.quadrature_rings and solver.quadrature_sectors must be >= 1");
  }
  if (!(calibration.robin > 0.0) || !(calibration.neumann > 0.0)) {
    throw ConfigError("solver.calibration_*: must be > 0");
  }
  if (!(bem.near_factor > 0.0)) throw ConfigError("bem.near_factor: must be > 0");
  if (!(bem.gmres_tolerance > 0.0)) throw ConfigError("bem.gmres_tolerance: must be > 0");
  if (bem.gmres_restart < 1) throw ConfigError("bem.gmres_restart: must be >= 1");

  Problem p = [&] {
    try {
      return make_problem(*this);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("problem setup: ") + e.what());
    }
  }();
  try {
    walk.validate(p.domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  try {
    if (problem == "electrodes") mesh.validate(cap_radius);
    if (mesh.depth < 0 || mesh.depth > 8) throw BemError("icosphere depth must be in [0, 8]");
  } catch (const BemError& e) {
    throw ConfigError(std::string("bem: ") + e.what());
  }
}

Problem make_problem(const RunConfig& config) {
  if (config.problem == "annulus") {
    OracleCase c = annulus_radial_case(config.oracle_r0, config.oracle_g);
    return {c.name, c.domain, c.data, c.exact};
  }
  if (config.problem == "robin") {
    if (config.oracle_degree < 0 || config.oracle_degree > 4) throw ConfigError("oracle.degree: must be in [0, 4]");
    OracleCase c = robin_sphere_case(config.oracle_degree, config.oracle_kappa);
    return {c.name, c.domain, c.data, c.exact};
  }
  if (config.problem == "dirichlet") {
    OracleCase c = dirichlet_polynomial_case(Polynomial::parse(config.oracle_polynomial));
    return {c.name, c.domain, c.data, c.exact};
  }
  if (config.problem != "electrodes") throw ConfigError("problem: unknown '" + config.problem + "'");

  DomainSpec domain(config.anomaly_center, config.anomaly_radius,
                    default_electrode_layout(config.electrode_count, config.cap_radius, config.contact_impedance));
  const ThetaConvention convention = config.theta == "polar" ? ThetaConvention::PolarAngle : ThetaConvention::YZPlane;
  BoundaryData data = BoundaryData::zero(domain);
  std::function<double(const Vec3&)> exact;
  if (config.data == "cos4theta") {
    data = BoundaryData::cos4theta(domain, convention);
  } else if (config.data.rfind("constant:", 0) == 0) {
    const double v = constant_value(config.data);
    data = BoundaryData::constant(domain, v);
    // Without an anomaly the solution is the constant itself.
    if (!domain.has_anomaly()) exact = [v](const Vec3&) { return v; };
  } else {
    exact = [](const Vec3&) { return 0.0; };
  }
  return {"electrodes:" + config.data, domain, data, exact};
}

}  // namespace pimc
