#pragma once

#include "pimc/geometry.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pimc {

/// Polynomial in (x, y, z) with exact monomial arithmetic; enough to build
/// and verify solid harmonics of low degree.
class Polynomial {
 public:
  using Exponents = std::array<int, 3>;

  Polynomial() = default;
  explicit Polynomial(std::map<Exponents, double> terms);

  /// Parses expressions such as "x^2 - y^2", "3*x*y*z" or "2 z^2 - x^2 - y^2".
  static Polynomial parse(const std::string& text);

  double operator()(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;
  Polynomial laplacian() const;
  int degree() const;
  bool is_zero(double tol = 0.0) const;
  bool is_homogeneous() const;
  const std::map<Exponents, double>& terms() const { return terms_; }
  std::string to_string() const;

 private:
  std::map<Exponents, double> terms_;
};

/// A configuration with a closed-form solution.
struct OracleCase {
  std::string name;
  DomainSpec domain;
  BoundaryData data;
  std::function<double(const Vec3&)> exact;
  /// Normal derivative of the exact solution along the outward normal of the
  /// domain at a boundary point.
  std::function<double(const Vec3&)> exact_flux;
};

/// Thrown for inputs outside an oracle's supported family.
class OracleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unit ball, Dirichlet data p on the whole sphere. p must be harmonic with
/// degree <= 4.
OracleCase dirichlet_polynomial_case(const Polynomial& p);

/// Representative solid harmonic of degree n: 1, z, x^2-y^2, xyz, x^4-6x^2y^2+y^4.
Polynomial solid_harmonic(int degree);

/// Whole-sphere Robin problem z du/dn + u = psi with z = 1/kappa and exact
/// solution the degree-n solid harmonic `harmonic`.
OracleCase robin_sphere_case(const Polynomial& harmonic, double kappa);
OracleCase robin_sphere_case(int degree, double kappa);

/// Unit ball minus the concentric ball r0; outward flux g on the outer sphere,
/// u = 0 on the inner one. Exact u(r) = g/r0 - g/r.
OracleCase annulus_radial_case(double r0, double g);

/// Residual of the boundary condition satisfied at boundary point y.
double boundary_residual(const OracleCase& oracle, const Vec3& y);

}  // namespace pimc
