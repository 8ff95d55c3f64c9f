#include <doctest.h>

#include "pimc/bem.hpp"
#include "pimc/oracle.hpp"

#include <cmath>
#include <sstream>

using namespace pimc;

namespace {

// One electrode at the north pole with a coarse patch, cheap enough for unit tests.
MeshParams coarse_patch(int depth) {
  MeshParams p;
  p.m1 = 6;
  p.m2 = 5;
  p.m3 = 5;
  p.m4 = 3;
  p.sectors = 36;
  p.depth = depth;
  return p;
}

double cap_area(double r) { return 2 * kPi * (1 - std::cos(r)); }

}  // namespace

TEST_CASE("spherical polygon areas") {
  const MeshElement octant = make_element({Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}, BoundaryRegion::neumann());
  CHECK(spherical_polygon_area(octant) == doctest::Approx(kPi / 2).epsilon(1e-13));
  CHECK(octant.area == doctest::Approx(kPi / 2).epsilon(1e-13));
  const double s = std::sqrt(0.5);
  const MeshElement lune = make_element({Vec3::UnitZ(), Vec3(s, 0, s), Vec3::UnitX(), Vec3(s, s, 0).normalized()},
                                        BoundaryRegion::neumann());
  CHECK(lune.n_vertices == 4);
  CHECK(lune.area > 0.0);
  CHECK(lune.area < kPi / 2);
}

TEST_CASE("icosphere tiles the sphere") {
  for (int depth = 0; depth <= 4; ++depth) {
    const SurfaceMesh m = build_icosphere(depth);
    CHECK(m.size() == 20u << (2 * depth));
    CHECK(m.total_area() == doctest::Approx(4 * kPi).epsilon(1e-12));
    for (const MeshElement& e : m.elements) {
      REQUIRE(e.region == BoundaryRegion::neumann());
      REQUIRE(std::abs(e.centroid.norm() - 1) < 1e-12);
    }
  }
}

TEST_CASE("graded electrode patch") {
  const Electrode e{1, Vec3(0, std::sin(0.7), std::cos(0.7)), 0.2, 0.5};
  const MeshParams p;
  const auto radii = ring_radii(e.cap_radius, p);
  CHECK(radii.size() == std::size_t(p.m1 + p.m2 + p.m3 + p.m4 + 1));
  CHECK(radii.front() == 0.0);
  CHECK(radii.back() == doctest::Approx(p.extended_radius));
  CHECK(std::find_if(radii.begin(), radii.end(), [](double r) { return std::abs(r - 0.2) < 1e-14; }) != radii.end());
  for (std::size_t i = 1; i < radii.size(); ++i) REQUIRE(radii[i] > radii[i - 1]);

  const SurfaceMesh patch = build_graded_electrode_mesh(e, p);
  // straight-sided rings slightly undercut the circular cap
  CHECK(patch.electrode_area(1) == doctest::Approx(cap_area(0.2)).epsilon(2e-3));
  CHECK(patch.total_area() == doctest::Approx(cap_area(0.3)).epsilon(2e-3));
  CHECK_THROWS_AS(p.validate(0.3), BemError);
}

TEST_CASE("global mesh covers the sphere exactly once") {
  const DomainSpec domain(Vec3::Zero(), 0.5, default_electrode_layout());
  MeshParams p;
  p.depth = 4;
  const SurfaceMesh m = build_global_mesh(domain, p);
  CHECK(m.total_area() == doctest::Approx(4 * kPi).epsilon(1e-10));
  CHECK(m.collar_elements > 0);
  for (int l = 1; l <= 8; ++l) CHECK(m.electrode_area(l) == doctest::Approx(cap_area(0.2)).epsilon(2e-3));
  // every element agrees with the domain's own classification of its centroid
  for (const MeshElement& e : m.elements) {
    const BoundaryRegion tag = domain.classify_boundary_point(e.centroid);
    if (e.region.kind == BoundaryRegion::Kind::RobinElectrode) REQUIRE(tag == e.region);
  }
  p.depth = 2;
  CHECK_THROWS_AS(build_global_mesh(domain, p), BemError);
}

TEST_CASE("mesh text round trip") {
  const Electrode e{1, Vec3::UnitZ(), 0.2, 0.5};
  const DomainSpec domain(Vec3::Zero(), 0.0, {e});
  const SurfaceMesh m = build_global_mesh(domain, coarse_patch(3));
  std::stringstream io;
  save_mesh(m, io);
  const SurfaceMesh back = load_mesh(io);
  REQUIRE(back.size() == m.size());
  CHECK(back.collar_elements == m.collar_elements);
  CHECK(back.params.sectors == m.params.sectors);
  for (std::size_t i = 0; i < m.size(); ++i) {
    REQUIRE(back.elements[i].n_vertices == m.elements[i].n_vertices);
    REQUIRE(back.elements[i].region == m.elements[i].region);
    for (int k = 0; k < m.elements[i].n_vertices; ++k) {
      REQUIRE(back.elements[i].vertices[k] == m.elements[i].vertices[k]);
    }
    REQUIRE(back.elements[i].area == m.elements[i].area);
  }
  std::stringstream bad("# pimc surface mesh\nnot a mesh\n");
  CHECK_THROWS_AS(load_mesh(bad), BemError);
}

TEST_CASE("Green's function symmetry and the anomaly condition") {
  const DomainSpec domain(Vec3::Zero(), 0.4, {});
  const GreensFunction g(domain);
  const Vec3 x(0.1, 0.6, -0.3);
  const Vec3 y(-0.5, 0.2, 0.7);
  CHECK(g(x, y).value == doctest::Approx(g(y, x).value).epsilon(1e-12));
  CHECK(GreensFunction::free_space(x, y).value == doctest::Approx(1 / (4 * kPi * (x - y).norm())));
  const Vec3 on_anomaly = 0.4 * Vec3(1, 2, -2).normalized();
  CHECK(std::abs(g(on_anomaly, y).value) < 1e-12);
  CHECK(std::abs(g(y, on_anomaly).value) < 1e-12);
  CHECK(GreensFunction(DomainSpec::unit_ball()).image(x, y).value == 0.0);

  // normal derivative in y by central differences along y/|y|
  const double h = 1e-6;
  const Vec3 n = y.normalized();
  const double fd = (g(x, y + h * n).value - g(x, y - h * n).value) / (2 * h);
  CHECK(g(x, y).normal_derivative == doctest::Approx(fd).epsilon(1e-6));

  CHECK_THROWS_AS(GreensFunction(DomainSpec(Vec3(0.1, 0, 0), 0.3, {})), BemError);
}

TEST_CASE("element integrals reproduce the uniform layer potentials") {
  const SurfaceMesh m = build_icosphere(3);
  // interior target: single layer 1, double layer -1
  const Vec3 x0(0.2, -0.1, 0.3);
  double s = 0;
  double d = 0;
  for (const MeshElement& e : m.elements) {
    const ElementIntegral I = integrate_element(e, x0, false);
    s += I.single;
    d += I.dbl;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(d == doctest::Approx(-1.0).epsilon(1e-8));

  // collocation targets on the surface: single layer 1, double layer -1/2
  for (std::size_t i : {std::size_t(0), std::size_t(517), m.size() - 1}) {
    s = d = 0;
    for (std::size_t j = 0; j < m.size(); ++j) {
      const ElementIntegral I = integrate_element(m.elements[j], m.elements[i].centroid, i == j);
      s += I.single;
      d += I.dbl;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d == doctest::Approx(-0.5).epsilon(1e-6));
  }

  // the area centroid is the mean of y over the curved element
  const MeshElement& e = m.elements[3];
  const Vec3 c = area_centroid(e);
  CHECK(c.norm() < 1.0);
  CHECK((c.normalized() - e.centroid).norm() < 1e-2);
}

TEST_CASE("double-layer row sums approach minus one half") {
  const DomainSpec ball = DomainSpec::unit_ball();
  const BoundaryData data = BoundaryData::zero(ball);
  double previous = 1.0;
  for (int depth : {2, 4}) {
    const SurfaceMesh m = build_icosphere(depth);
    const BemOperator op(m, ball, data, BemMode::Robin);
    const Eigen::VectorXd rows = op.double_layer_row_sums();
    const double err = (rows.array() + 0.5).abs().maxCoeff();
    CHECK(err < 1e-3);
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("matrix-free apply matches the dense operator") {
  const OracleCase oc = annulus_radial_case(0.5, 1.0);
  const SurfaceMesh m = build_icosphere(2);
  const BemOperator op(m, oc.domain, oc.data, BemMode::Robin);
  const Eigen::MatrixXd A = op.dense();
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(op.size(), -1.0, 2.0);
  CHECK((A * v - op.apply(v)).norm() < 1e-12 * (A * v).norm());
  CHECK(A.allFinite());
}

TEST_CASE("constant electrode data reproduces the constant") {
  const Electrode a{1, Vec3::UnitZ(), 0.2, 0.5};
  const Electrode b{2, -Vec3::UnitY(), 0.2, 0.5};
  const DomainSpec domain(Vec3::Zero(), 0.0, {a, b});
  const BoundaryData data = BoundaryData::constant(domain, 2.5);
  const SurfaceMesh m = build_global_mesh(domain, coarse_patch(3));
  const BemOperator op(m, domain, data, BemMode::Robin);
  const BemSolution sol = solve(op, m, data);
  CHECK(sol.residual_norm < 1e-8);
  CHECK((sol.potential.array() - 2.5).abs().maxCoeff() < 2.5e-3);
  const ReferenceSolution ref = reference_currents(sol, m, domain);
  for (double j : ref.currents) CHECK(std::abs(j) < 2.5e-3);
}

TEST_CASE("closed-form cases through the boundary element solver") {
  const SurfaceMesh m3 = build_icosphere(3);
  {
    const OracleCase oc = annulus_radial_case(0.5, 1.0);
    const BemOperator op(m3, oc.domain, oc.data, BemMode::Robin);
    const BemSolution sol = solve(op, m3, oc.data);
    const Vec3 x(0, 0, 0.9);
    CHECK(interior_potential(x, sol, m3, oc.domain).value == doctest::Approx(oc.exact(x)).epsilon(5e-3));
  }
  {
    const OracleCase oc = dirichlet_polynomial_case(Polynomial::parse("x^2 - y^2"));
    SurfaceMesh m = m3;
    for (auto& e : m.elements) e.region = BoundaryRegion::outer_dirichlet();
    const BemOperator op(m, oc.domain, oc.data, BemMode::Dirichlet);
    const BemSolution sol = solve(op, m, oc.data);
    const Vec3 x(0.5, 0, 0);
    CHECK(interior_potential(x, sol, m, oc.domain).value == doctest::Approx(0.25).epsilon(5e-3));
    double worst = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      worst = std::max(worst, std::abs(sol.flux[i] - oc.exact_flux(m.elements[i].centroid)));
    }
    CHECK(worst < 2e-2);
  }
  {
    const OracleCase oc = robin_sphere_case(1, 2.0);
    const SurfaceMesh m = build_global_mesh(oc.domain, MeshParams{.depth = 3});
    const BemOperator op(m, oc.domain, oc.data, BemMode::Robin);
    const BemSolution sol = solve(op, m, oc.data);
    const Vec3 x(0, 0, 0.9);
    CHECK(interior_potential(x, sol, m, oc.domain).value == doctest::Approx(0.9).epsilon(5e-3));
  }
}
