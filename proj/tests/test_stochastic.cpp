#include <doctest.h>

#include "pimc/oracle.hpp"
#include "pimc/stochastic.hpp"

#include <cmath>

using namespace pimc;

namespace {

WalkParams small_walk() {
  WalkParams p;
  p.max_boundary_events = 200;
  return p;
}

}  // namespace

TEST_CASE("path streams are reproducible and distinct") {
  Rng a = make_path_rng(42, 3, 17);
  Rng b = make_path_rng(42, 3, 17);
  Rng c = make_path_rng(42, 3, 18);
  Rng d = make_path_rng(42, 4, 17);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
}

TEST_CASE("uniform directions have zero mean and isotropic second moment") {
  Rng rng = make_path_rng(1, 0, 0);
  const int n = 200000;
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  for (int k = 0; k < n; ++k) {
    const Vec3 v = sample_uniform_direction(rng);
    REQUIRE(std::abs(v.norm() - 1.0) < 1e-12);
    mean += v;
    second += v * v.transpose();
  }
  mean /= n;
  second /= n;
  CHECK(mean.norm() < 5.0 / std::sqrt(n));
  CHECK((second - Eigen::Matrix3d::Identity() / 3).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("shell counts and local time") {
  CHECK(local_time_increment(StepOutcome::Kind::Interior) == 0);
  CHECK(local_time_increment(StepOutcome::Kind::Shell) == 1);
  CHECK(local_time_increment(StepOutcome::Kind::ShellEnlarged) == 4);
  const WalkParams p;
  CHECK(local_time_value(3, p) == doctest::Approx(3 * 0.005 * 0.005 / 0.03));
}

TEST_CASE("walk invariants along paths") {
  const DomainSpec domain(Vec3::Zero(), 0.5, default_electrode_layout());
  const WalkParams params = small_walk();
  for (std::uint64_t path = 0; path < 20; ++path) {
    Rng rng = make_path_rng(5, 0, path);
    WalkState state;
    state.position = Vec3(0, 0, 0.8);
    long counter = 0;
    int events = 0;
    for (long s = 0; s < 200000 && !state.terminated && events < 200; ++s) {
      const StepOutcome out = wos_step(state, domain, params, rng);
      REQUIRE((out.counter_increment == 0 || out.counter_increment == 1 || out.counter_increment == 4));
      REQUIRE(state.local_time_counter == counter + out.counter_increment);
      counter = state.local_time_counter;
      if (out.event) {
        ++events;
        const BoundaryEvent& e = *out.event;
        REQUIRE(std::abs(e.point.norm() - 1.0) < 1e-12);
        REQUIRE((e.point - out.sample).norm() <= 2 * params.delta_x + 1e-12);
        REQUIRE(e.local_time_increment > 0.0);
        REQUIRE(e.overshoot > 0.0);
        REQUIRE(e.region == domain.classify_boundary_point(e.point));
      }
      if (!state.terminated) {
        REQUIRE(state.position.norm() <= 1.0 + 1e-12);
        REQUIRE(domain.distance_to_anomaly(state.position) > 0.0);
      }
    }
  }
}

TEST_CASE("Feynman-Kac weight stays in (0, 1] and never grows") {
  const DomainSpec domain(Vec3::Zero(), 0.0, default_electrode_layout());
  const BoundaryData data = BoundaryData::cos4theta(domain);
  WalkParams shorter = small_walk();
  shorter.max_boundary_events = 100;
  const WalkParams longer = small_walk();
  for (std::uint64_t path = 0; path < 30; ++path) {
    // the longer path extends the shorter one step for step
    Rng a = make_path_rng(9, 0, path);
    Rng b = make_path_rng(9, 0, path);
    const PathResult ra = run_path(Vec3(0, 0.1, 0.9), domain, data, shorter, {}, a);
    const PathResult rb = run_path(Vec3(0, 0.1, 0.9), domain, data, longer, {}, b);
    REQUIRE(ra.residual_weight > 0.0);
    REQUIRE(ra.residual_weight <= 1.0);
    REQUIRE(rb.residual_weight <= ra.residual_weight);
    REQUIRE(rb.steps > ra.steps);
  }
}

TEST_CASE("run_path is bit-reproducible") {
  const OracleCase oc = robin_sphere_case(1, 2.0);
  const WalkParams params = small_walk();
  Rng a = make_path_rng(123, 0, 4);
  Rng b = make_path_rng(123, 0, 4);
  const PathResult ra = run_path(Vec3(0, 0, 0.9), oc.domain, oc.data, params, {}, a);
  const PathResult rb = run_path(Vec3(0, 0, 0.9), oc.domain, oc.data, params, {}, b);
  CHECK(ra.value() == rb.value());
  CHECK(ra.steps == rb.steps);
  CHECK(ra.boundary_events == params.max_boundary_events);
  CHECK(ra.residual_weight > 0.0);
  CHECK(ra.residual_weight <= 1.0);
}

TEST_CASE("absorbing walks end on the sphere with the boundary value") {
  const OracleCase oc = dirichlet_polynomial_case(Polynomial::parse("x^2 - y^2"));
  const WalkParams params;
  for (std::uint64_t path = 0; path < 200; ++path) {
    Rng rng = make_path_rng(2, 0, path);
    const PathResult r = run_path(Vec3(0.5, 0, 0), oc.domain, oc.data, params, {}, rng);
    REQUIRE(r.absorbed);
    REQUIRE(r.boundary_events == 0);
    REQUIRE(std::abs(r.value()) <= 1.0);
    REQUIRE(r.residual_weight == 0.0);
  }
}

TEST_CASE("walk parameters are validated") {
  const DomainSpec ball = DomainSpec::unit_ball();
  WalkParams p;
  p.validate(ball);
  p.delta_x = 0.02;
  CHECK_THROWS_AS(p.validate(ball), std::invalid_argument);
  p = {};
  p.max_boundary_events = 0;
  CHECK_THROWS_AS(p.validate(ball), std::invalid_argument);
  p = {};
  p.n_paths = 0;
  CHECK_THROWS_AS(p.validate(ball), std::invalid_argument);
  p = {};
  const DomainSpec tight(Vec3::Zero(), 0.995, {});
  CHECK_THROWS_AS(p.validate(tight), std::invalid_argument);
}
