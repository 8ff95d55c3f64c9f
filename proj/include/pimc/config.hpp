#pragma once

#include "pimc/bem.hpp"
#include "pimc/feynman_kac.hpp"
#include "pimc/geometry.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace pimc {

/// Malformed or out-of-range run configuration. The message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a run needs. Stored as a flat `key = value` file; see
/// config_keys() for the schema.
struct RunConfig {
  // Problem: "electrodes" (the complete electrode model below) or one of the
  // closed-form cases "annulus", "robin", "dirichlet".
  std::string problem = "electrodes";
  Vec3 anomaly_center = Vec3::Zero();
  double anomaly_radius = 0.5;
  int electrode_count = 8;
  double cap_radius = 0.2;
  double contact_impedance = 0.5;
  std::string data = "cos4theta";  // cos4theta | constant:<V> | zero
  std::string theta = "yz";        // yz | polar

  double oracle_r0 = 0.5;
  double oracle_g = 1.0;
  int oracle_degree = 1;
  double oracle_kappa = 2.0;
  std::string oracle_polynomial = "x^2 - y^2";

  Vec3 point = Vec3(0.0, 0.0, 0.9);

  WalkParams walk;
  unsigned workers = 0;
  Calibration calibration;
  QuadratureSpec quadrature;

  MeshParams mesh = [] {
    MeshParams p;
    p.depth = 4;
    return p;
  }();
  BemOptions bem;
  std::string mesh_in;
  std::string mesh_out;

  std::string format = "table";  // table | json | csv
  std::string out;

  /// Throws ConfigError for values outside the solvers' preconditions.
  void validate() const;

  bool operator==(const RunConfig& other) const;
};

/// Documented keys in echo order, each with a one-line description.
struct ConfigKey {
  std::string name;
  std::string help;
};
std::vector<ConfigKey> config_keys();

/// `key = value` lines; `#` starts a comment. Unknown keys and unparsable
/// values throw ConfigError with the line number. Missing keys keep defaults.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Sets one key from its text form.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Every key, one per line, in a form parse_config reads back unchanged.
std::string echo_config(const RunConfig& config);

/// FNV-1a of the echo without the settings that cannot change a number
/// (worker count, output format and path), as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// A ready-to-run problem: domain, data and the exact solution if known.
struct Problem {
  std::string name;
  DomainSpec domain;
  BoundaryData data;
  std::function<double(const Vec3&)> exact;
};

Problem make_problem(const RunConfig& config);

}  // namespace pimc
