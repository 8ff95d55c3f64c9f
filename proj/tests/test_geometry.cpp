#include <doctest.h>

#include "pimc/geometry.hpp"
#include "pimc/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace pimc;

namespace {

Vec3 random_point_in_ball(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() < 1.0) return p;
  }
}

DomainSpec default_domain(double r0 = 0.5) {
  return DomainSpec(Vec3::Zero(), r0, default_electrode_layout());
}

}  // namespace

TEST_CASE("distance to boundary on the axes") {
  const DomainSpec d = default_domain(0.5);
  CHECK(d.distance_to_boundary(Vec3(0.75, 0, 0)) == doctest::Approx(0.25));
  CHECK(d.distance_to_boundary(Vec3(0, 0.9, 0)) == doctest::Approx(0.1));
  CHECK(d.distance_to_boundary(Vec3(0, 0, -0.55)) == doctest::Approx(0.05));
  CHECK_THROWS_AS(d.distance_to_boundary(Vec3(0.2, 0, 0)), GeometryError);
  CHECK_THROWS_AS(d.distance_to_boundary(Vec3(1.2, 0, 0)), GeometryError);

  const DomainSpec ball = DomainSpec::unit_ball();
  CHECK(ball.distance_to_boundary(Vec3::Zero()) == doctest::Approx(1.0));
}

TEST_CASE("inscribed ball stays inside the domain") {
  const DomainSpec d(Vec3(0.1, -0.2, 0.15), 0.3, default_electrode_layout());
  Rng rng = make_path_rng(7, 0, 0);
  int tested = 0;
  while (tested < 300) {
    const Vec3 x = random_point_in_ball(rng);
    if (!d.contains(x)) continue;
    const double r = d.distance_to_boundary(x);
    REQUIRE(r > 0.0);
    for (int k = 0; k < 50; ++k) {
      const Vec3 y = x + (r * (1.0 - 1e-9)) * sample_uniform_direction(rng);
      REQUIRE(d.contains(y));
    }
    ++tested;
  }
}

TEST_CASE("boundary classification partitions the sphere") {
  const DomainSpec d = default_domain();
  Rng rng = make_path_rng(11, 0, 0);
  int on_electrodes = 0;
  for (int k = 0; k < 10000; ++k) {
    const Vec3 y = sample_uniform_direction(rng);
    int brute = 0;
    int hits = 0;
    for (const Electrode& e : d.electrodes()) {
      if (std::acos(std::clamp(y.dot(e.center), -1.0, 1.0)) <= e.cap_radius) {
        brute = e.id;
        ++hits;
      }
    }
    REQUIRE(hits <= 1);
    const BoundaryRegion tag = d.classify_boundary_point(y);
    if (brute > 0) {
      CHECK(tag == BoundaryRegion::robin(brute));
      ++on_electrodes;
    } else {
      CHECK(tag == BoundaryRegion::neumann());
    }
  }
  // eight caps of radius 0.2 cover 8 (1 - cos 0.2) / 2 of the sphere
  const double expected = 8 * (1 - std::cos(0.2)) / 2 * 10000;
  CHECK(std::abs(on_electrodes - expected) < 5 * std::sqrt(expected));

  CHECK(d.classify_boundary_point(Vec3(0.5, 0, 0)) == BoundaryRegion::anomaly());
  const DomainSpec absorbing = DomainSpec::unit_ball(OuterCondition::Absorbing);
  CHECK(absorbing.classify_boundary_point(Vec3(0, 1, 0)) == BoundaryRegion::outer_dirichlet());
}

TEST_CASE("default layout") {
  const auto layout = default_electrode_layout();
  REQUIRE(layout.size() == 8);
  for (int l = 0; l < 8; ++l) {
    const double theta = l * kPi / 4;
    CHECK(layout[l].id == l + 1);
    CHECK((layout[l].center - Vec3(0, std::sin(theta), std::cos(theta))).norm() < 1e-12);
    CHECK(std::abs(layout[l].center.norm() - 1.0) < 1e-12);
    CHECK(layout[l].cap_radius == 0.2);
    CHECK(layout[l].contact_impedance == 0.5);
  }
  // a quarter turn about x maps the set onto itself
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(kPi / 2, Vec3::UnitX()).toRotationMatrix();
  for (const Electrode& e : layout) {
    const Vec3 c = rot * e.center;
    double best = 1.0;
    for (const Electrode& f : layout) best = std::min(best, (c - f.center).norm());
    CHECK(best < 1e-12);
  }
}

TEST_CASE("invalid domains are rejected") {
  CHECK_THROWS_AS(DomainSpec(Vec3(0.6, 0, 0), 0.5, {}), GeometryError);
  CHECK_THROWS_AS(DomainSpec(Vec3::Zero(), -0.1, {}), GeometryError);
  Electrode a{1, Vec3::UnitZ(), 0.2, 0.5};
  Electrode b{2, Vec3(0, std::sin(0.3), std::cos(0.3)), 0.2, 0.5};
  CHECK_THROWS_AS(DomainSpec(Vec3::Zero(), 0.0, {a, b}), GeometryError);
  Electrode off = a;
  off.center = Vec3(0, 0, 1.1);
  CHECK_THROWS_AS(DomainSpec(Vec3::Zero(), 0.0, {off}), GeometryError);
  Electrode bad_z = a;
  bad_z.contact_impedance = 0.0;
  CHECK_THROWS_AS(DomainSpec(Vec3::Zero(), 0.0, {bad_z}), GeometryError);
  Electrode bad_r = a;
  bad_r.cap_radius = 0.0;
  CHECK_THROWS_AS(DomainSpec(Vec3::Zero(), 0.0, {bad_r}), GeometryError);
}

TEST_CASE("projection and frames") {
  const Projection p = project_to_outer_boundary(Vec3(0.3, -0.4, 0.0));
  CHECK((p.point - Vec3(0.6, -0.8, 0)).norm() < 1e-14);
  CHECK((p.normal - p.point).norm() < 1e-14);
  CHECK_THROWS(project_to_outer_boundary(Vec3::Zero()));

  Rng rng = make_path_rng(3, 0, 0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 c = sample_uniform_direction(rng);
    const auto [e1, e2] = tangent_frame(c);
    CHECK(std::abs(e1.dot(c)) < 1e-12);
    CHECK(std::abs(e1.norm() - 1) < 1e-12);
    CHECK((e2 - c.cross(e1)).norm() < 1e-12);
    const double rho = 0.37;
    const Vec3 q = point_on_cap(c, rho, 1.1 * k);
    CHECK(geodesic_distance(c, q) == doctest::Approx(rho).epsilon(1e-12));
  }
}

TEST_CASE("theta conventions and cos4theta data") {
  CHECK(theta_of(Vec3(0, 0, 1), ThetaConvention::YZPlane) == doctest::Approx(0.0));
  CHECK(theta_of(Vec3(0, 1, 0), ThetaConvention::YZPlane) == doctest::Approx(kPi / 2));
  CHECK(theta_of(Vec3(0, 1, 0), ThetaConvention::PolarAngle) == doctest::Approx(kPi / 2));
  CHECK(theta_of(Vec3(0, 0, -1), ThetaConvention::PolarAngle) == doctest::Approx(kPi));

  const DomainSpec d = default_domain();
  const BoundaryData data = BoundaryData::cos4theta(d);
  data.validate(d);
  for (const Electrode& e : d.electrodes()) {
    CHECK(data.phi1(e.id, e.center) == doctest::Approx(e.id % 2 ? 1.0 : -1.0));
    CHECK(data.kappa(e.id) == doctest::Approx(2.0));
  }
  BoundaryData broken = data;
  broken.robin_coefficient.pop_back();
  CHECK_THROWS_AS(broken.validate(d), GeometryError);
  broken = data;
  broken.robin_coefficient[0] = -1.0;
  CHECK_THROWS_AS(broken.validate(d), GeometryError);
}
