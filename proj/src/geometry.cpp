#include "pimc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pimc {

std::string to_string(const BoundaryRegion& region) {
  switch (region.kind) {
    case BoundaryRegion::Kind::RobinElectrode:
      return "robin(" + std::to_string(region.electrode) + ")";
    case BoundaryRegion::Kind::NeumannOff:
      return "neumann";
    case BoundaryRegion::Kind::DirichletAnomaly:
      return "anomaly";
    case BoundaryRegion::Kind::DirichletOuter:
      return "dirichlet";
  }
  return "unknown";
}

double geodesic_distance(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

DomainSpec::DomainSpec(Vec3 anomaly_center, double anomaly_radius,
                       std::vector<Electrode> electrodes, OuterCondition outer)
    : anomaly_center_(std::move(anomaly_center)),
      anomaly_radius_(anomaly_radius),
      electrodes_(std::move(electrodes)),
      outer_(outer) {
  if (!(anomaly_radius_ >= 0.0) || !anomaly_center_.allFinite()) {
    throw GeometryError("anomaly radius must be >= 0 with a finite center");
  }
  if (has_anomaly() && anomaly_center_.norm() + anomaly_radius_ >= kOuterRadius) {
    throw GeometryError("anomaly must lie strictly inside the outer sphere");
  }
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    const Electrode& e = electrodes_[i];
    if (e.id != static_cast<int>(i) + 1) {
      throw GeometryError("electrode ids must be 1..L in order");
    }
    if (std::abs(e.center.norm() - 1.0) > 1e-12) {
      throw GeometryError("electrode " + std::to_string(e.id) + " center is not on the unit sphere");
    }
    if (!(e.cap_radius > 0.0) || e.cap_radius > kPi) {
      throw GeometryError("electrode " + std::to_string(e.id) + " cap radius must be in (0, pi]");
    }
    if (!(e.contact_impedance > 0.0) || !std::isfinite(e.contact_impedance)) {
      throw GeometryError("electrode " + std::to_string(e.id) + " contact impedance must be > 0");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const Electrode& f = electrodes_[j];
      if (geodesic_distance(e.center, f.center) <= e.cap_radius + f.cap_radius) {
        throw GeometryError("electrodes " + std::to_string(f.id) + " and " + std::to_string(e.id) +
                            " overlap");
      }
    }
    cap_cos_.push_back(std::cos(e.cap_radius));
  }
}

DomainSpec DomainSpec::unit_ball(OuterCondition outer) {
  return DomainSpec(Vec3::Zero(), 0.0, {}, outer);
}

const Electrode& DomainSpec::electrode(int id) const {
  if (id < 1 || id > static_cast<int>(electrodes_.size())) {
    throw GeometryError("no electrode with id " + std::to_string(id));
  }
  return electrodes_[id - 1];
}

double DomainSpec::distance_to_anomaly(const Vec3& x) const {
  if (!has_anomaly()) return std::numeric_limits<double>::infinity();
  return (x - anomaly_center_).norm() - anomaly_radius_;
}

bool DomainSpec::contains(const Vec3& x) const {
  return distance_to_outer(x) > 0.0 && distance_to_anomaly(x) > 0.0;
}

double DomainSpec::distance_to_boundary(const Vec3& x) const {
  const double d_outer = distance_to_outer(x);
  const double d_anomaly = distance_to_anomaly(x);
  if (d_outer < 0.0 || d_anomaly < 0.0 || !x.allFinite()) {
    std::ostringstream os;
    os << "point (" << x.x() << ", " << x.y() << ", " << x.z() << ") is outside the domain";
    throw GeometryError(os.str());
  }
  return std::min(d_outer, d_anomaly);
}

std::optional<int> DomainSpec::electrode_at(const Vec3& y) const {
  // Geodesic distance <= cap radius, compared through cosines.
  const Vec3 u = y.normalized();
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    if (u.dot(electrodes_[i].center) >= cap_cos_[i]) return electrodes_[i].id;
  }
  return std::nullopt;
}

BoundaryRegion DomainSpec::classify_boundary_point(const Vec3& y) const {
  if (has_anomaly() && std::abs(distance_to_anomaly(y)) <= kBoundaryTolerance * anomaly_radius_) {
    return BoundaryRegion::anomaly();
  }
  if (std::abs(y.norm() - kOuterRadius) > kBoundaryTolerance * kOuterRadius) {
    std::ostringstream os;
    os << "point (" << y.x() << ", " << y.y() << ", " << y.z() << ") is not on a boundary sphere";
    throw GeometryError(os.str());
  }
  if (outer_ == OuterCondition::Absorbing) return BoundaryRegion::outer_dirichlet();
  if (auto id = electrode_at(y)) return BoundaryRegion::robin(*id);
  return BoundaryRegion::neumann();
}

Projection project_to_outer_boundary(const Vec3& x, double outer_radius) {
  const double r = x.norm();
  if (!(r > 0.0)) {
    throw GeometryError("radial projection is undefined at the center of the sphere");
  }
  const Vec3 normal = x / r;
  return {outer_radius * normal, normal};
}

std::vector<Electrode> default_electrode_layout(int count, double cap_radius,
                                                double contact_impedance) {
  std::vector<Electrode> out;
  out.reserve(count);
  for (int l = 1; l <= count; ++l) {
    const double theta = 2.0 * kPi * (l - 1) / count;
    Electrode e;
    e.id = l;
    e.center = Vec3(0.0, std::sin(theta), std::cos(theta)).normalized();
    e.cap_radius = cap_radius;
    e.contact_impedance = contact_impedance;
    out.push_back(e);
  }
  return out;
}

std::pair<Vec3, Vec3> tangent_frame(const Vec3& c) {
  const Vec3 trial = std::abs(c.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (trial - trial.dot(c) * c).normalized();
  return {e1, c.cross(e1)};
}

Vec3 point_on_cap(const Vec3& c, double rho, double psi) {
  const auto [e1, e2] = tangent_frame(c);
  return (std::cos(rho) * c + std::sin(rho) * (std::cos(psi) * e1 + std::sin(psi) * e2)).normalized();
}

double theta_of(const Vec3& y, ThetaConvention convention) {
  switch (convention) {
    case ThetaConvention::PolarAngle:
      return std::acos(std::clamp(y.z() / y.norm(), -1.0, 1.0));
    case ThetaConvention::YZPlane:
      return std::atan2(y.y(), y.z());
  }
  return 0.0;
}

void BoundaryData::validate(const DomainSpec& domain) const {
  if (!phi1 || !phi2 || !phi3) throw GeometryError("boundary data functions must all be set");
  if (robin_coefficient.size() != domain.electrodes().size()) {
    throw GeometryError("one Robin coefficient per electrode is required");
  }
  for (double k : robin_coefficient) {
    if (!(k >= 0.0) || !std::isfinite(k)) {
      throw GeometryError("Robin coefficients must be finite and >= 0");
    }
  }
}

namespace {

std::vector<double> kappas(const DomainSpec& domain) {
  std::vector<double> out;
  for (const Electrode& e : domain.electrodes()) out.push_back(1.0 / e.contact_impedance);
  return out;
}

}  // namespace

BoundaryData BoundaryData::zero(const DomainSpec& domain) {
  return {[](int, const Vec3&) { return 0.0; }, [](const Vec3&) { return 0.0; },
          [](const Vec3&) { return 0.0; }, kappas(domain)};
}

BoundaryData BoundaryData::cos4theta(const DomainSpec& domain, ThetaConvention convention) {
  BoundaryData data = zero(domain);
  data.phi1 = [convention](int, const Vec3& y) { return std::cos(4.0 * theta_of(y, convention)); };
  return data;
}

BoundaryData BoundaryData::constant(const DomainSpec& domain, double value) {
  BoundaryData data = zero(domain);
  data.phi1 = [value](int, const Vec3&) { return value; };
  return data;
}

}  // namespace pimc
