#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pimc {

using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Thrown when a domain, electrode layout or boundary-data block violates
/// its invariants.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Electrode cap on the unit sphere. `cap_radius` is a geodesic radius.
struct Electrode {
  int id = 1;
  Vec3 center = Vec3::UnitZ();
  double cap_radius = 0.2;
  double contact_impedance = 0.5;
};

/// How the outer sphere behaves for the walk. `Reflecting` is the complete
/// electrode model (Robin on caps, Neumann elsewhere); `Absorbing` turns the
/// whole outer sphere into a Dirichlet boundary and is used by validation
/// problems only.
enum class OuterCondition { Reflecting, Absorbing };

struct BoundaryRegion {
  enum class Kind { RobinElectrode, NeumannOff, DirichletAnomaly, DirichletOuter };
  Kind kind = Kind::NeumannOff;
  int electrode = 0;  // 1-based, only meaningful for RobinElectrode

  static BoundaryRegion robin(int id) { return {Kind::RobinElectrode, id}; }
  static BoundaryRegion neumann() { return {Kind::NeumannOff, 0}; }
  static BoundaryRegion anomaly() { return {Kind::DirichletAnomaly, 0}; }
  static BoundaryRegion outer_dirichlet() { return {Kind::DirichletOuter, 0}; }

  bool operator==(const BoundaryRegion&) const = default;
};

std::string to_string(const BoundaryRegion& region);

/// Unit ball minus an optional spherical anomaly, with electrode caps on the
/// outer sphere. Validated on construction and immutable afterwards.
class DomainSpec {
 public:
  static constexpr double kOuterRadius = 1.0;
  static constexpr double kBoundaryTolerance = 1e-9;

  DomainSpec(Vec3 anomaly_center, double anomaly_radius, std::vector<Electrode> electrodes,
             OuterCondition outer = OuterCondition::Reflecting);

  /// No anomaly, no electrodes.
  static DomainSpec unit_ball(OuterCondition outer = OuterCondition::Reflecting);

  double outer_radius() const { return kOuterRadius; }
  const Vec3& anomaly_center() const { return anomaly_center_; }
  double anomaly_radius() const { return anomaly_radius_; }
  bool has_anomaly() const { return anomaly_radius_ > 0.0; }
  bool anomaly_is_concentric() const { return !has_anomaly() || anomaly_center_.norm() == 0.0; }
  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  const Electrode& electrode(int id) const;
  OuterCondition outer_condition() const { return outer_; }

  double distance_to_outer(const Vec3& x) const { return kOuterRadius - x.norm(); }
  /// Signed gap to the anomaly surface; +inf without an anomaly.
  double distance_to_anomaly(const Vec3& x) const;

  bool contains(const Vec3& x) const;

  /// min(distance to the outer sphere, distance to the anomaly sphere) for an
  /// interior point. Throws for points outside the closed domain.
  double distance_to_boundary(const Vec3& x) const;

  /// Electrode whose cap contains the outer-sphere point `y`, if any.
  std::optional<int> electrode_at(const Vec3& y) const;

  BoundaryRegion classify_boundary_point(const Vec3& y) const;

 private:
  Vec3 anomaly_center_;
  double anomaly_radius_;
  std::vector<Electrode> electrodes_;
  std::vector<double> cap_cos_;  // cos(cap_radius) per electrode
  OuterCondition outer_;
};

/// Closest point on the outer sphere and the outward normal there.
struct Projection {
  Vec3 point;
  Vec3 normal;
};

Projection project_to_outer_boundary(const Vec3& x, double outer_radius = DomainSpec::kOuterRadius);

/// Orthonormal tangent directions (e1, e2) at the unit vector c, with
/// e2 = c x e1. e1 is the x axis projected onto the tangent plane whenever
/// that is well defined, so caps centred on the y-z circle share one frame.
std::pair<Vec3, Vec3> tangent_frame(const Vec3& c);

/// Point at geodesic distance rho from c in the direction at azimuth psi of
/// tangent_frame(c).
Vec3 point_on_cap(const Vec3& c, double rho, double psi);

/// Great-circle distance between two points on the unit sphere.
double geodesic_distance(const Vec3& a, const Vec3& b);

/// `count` caps of geodesic radius `cap_radius`, centred on the y-z great
/// circle every 360/count degrees starting at the north pole (0,0,1).
std::vector<Electrode> default_electrode_layout(int count = 8, double cap_radius = 0.2,
                                                double contact_impedance = 0.5);

/// Angle conventions for the `cos(4 theta)` electrode data.
enum class ThetaConvention {
  PolarAngle,  // theta = arccos(z/|y|), the usual spherical polar angle
  YZPlane,     // theta = atan2(y, z), the angle of the projection onto the y-z plane
};

double theta_of(const Vec3& y, ThetaConvention convention);

/// Boundary data for the mixed problem
///   z_l du/dn + u = phi1  on electrode l
///       du/dn     = phi2  off the electrodes
///           u     = phi3  on Dirichlet boundaries (anomaly, absorbing outer sphere)
/// `robin_coefficient[l-1]` is 1/z_l.
struct BoundaryData {
  std::function<double(int, const Vec3&)> phi1;
  std::function<double(const Vec3&)> phi2;
  std::function<double(const Vec3&)> phi3;
  std::vector<double> robin_coefficient;

  double kappa(int electrode_id) const { return robin_coefficient.at(electrode_id - 1); }
  void validate(const DomainSpec& domain) const;

  /// All-zero data with Robin coefficients taken from the electrodes.
  static BoundaryData zero(const DomainSpec& domain);
  /// phi1 = cos(4 theta) on every electrode, phi2 = phi3 = 0.
  static BoundaryData cos4theta(const DomainSpec& domain,
                                ThetaConvention convention = ThetaConvention::YZPlane);
  /// phi1 = value on every electrode, phi2 = phi3 = 0.
  static BoundaryData constant(const DomainSpec& domain, double value);
};

}  // namespace pimc
