#include "pimc/stochastic.hpp"

#include <algorithm>
#include <cmath>

namespace pimc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Below this weight the remaining Feynman-Kac contributions are negligible.
constexpr double kNegligibleWeight = 1e-14;

}  // namespace

Rng make_path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd6e8feb86659fd93ULL));
  h = splitmix64(h ^ path);
  return Rng(h);
}

void WalkParams::validate(const DomainSpec& domain) const {
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) throw std::invalid_argument("epsilon must be in (0, 0.5)");
  if (!(delta_x > 0.0) || !(delta_x < epsilon)) {
    throw std::invalid_argument("delta_x must satisfy 0 < delta_x < epsilon");
  }
  if (max_boundary_events < 1) throw std::invalid_argument("max_boundary_events (NP) must be >= 1");
  if (n_paths < 1) throw std::invalid_argument("n_paths (N) must be >= 1");
  if (!(absorption_shell > 0.0) || !(absorption_shell < 0.5)) {
    throw std::invalid_argument("absorption_shell must be in (0, 0.5)");
  }
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (domain.has_anomaly() && domain.outer_condition() == OuterCondition::Reflecting) {
    const double gap = domain.outer_radius() - domain.anomaly_center().norm() - domain.anomaly_radius();
    if (gap <= epsilon + 2.0 * delta_x + absorption_shell) {
      throw std::invalid_argument("anomaly is too close to the outer sphere for the shell walk");
    }
  }
}

Vec3 sample_uniform_direction(Rng& rng) {
  // Marsaglia (1972): a point uniform in the unit disk lifted to the sphere.
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double a = 0.0;
  double b = 0.0;
  double s = 0.0;
  do {
    a = unit(rng);
    b = unit(rng);
    s = a * a + b * b;
  } while (s >= 1.0);
  const double lift = 2.0 * std::sqrt(1.0 - s);
  return Vec3(a * lift, b * lift, 1.0 - 2.0 * s);
}

int local_time_increment(StepOutcome::Kind kind) {
  switch (kind) {
    case StepOutcome::Kind::Interior:
      return 0;
    case StepOutcome::Kind::Shell:
      return 1;
    case StepOutcome::Kind::ShellEnlarged:
      return 4;
  }
  return 0;
}

double local_time_value(long counter_delta, const WalkParams& params) {
  return static_cast<double>(counter_delta) * params.delta_x * params.delta_x / (3.0 * params.epsilon);
}

StepOutcome wos_step(WalkState& state, const DomainSpec& domain, const WalkParams& params, Rng& rng) {
  StepOutcome out;
  const Vec3 x = state.position;
  if (!state.gaps_cached) {
    state.outer_gap = domain.distance_to_outer(x);
    state.anomaly_gap = domain.distance_to_anomaly(x);
  }
  const double d_outer = state.outer_gap;
  const double d_anomaly = state.anomaly_gap;
  const bool reflecting = domain.outer_condition() == OuterCondition::Reflecting;

  if (!reflecting) {
    out.radius = std::min(d_outer, d_anomaly);
  } else if (d_outer < params.epsilon) {
    if (d_outer < params.delta_x) {
      out.kind = StepOutcome::Kind::ShellEnlarged;
      out.radius = 2.0 * params.delta_x;
    } else {
      out.kind = StepOutcome::Kind::Shell;
      out.radius = params.delta_x;
    }
  } else {
    // Stop at the shell instead of jumping across it; never below dx so the
    // walk cannot stall just outside the shell.
    out.radius = std::min(std::max(d_outer - params.epsilon, params.delta_x), d_anomaly);
  }

  out.counter_increment = local_time_increment(out.kind);
  out.sample = x + out.radius * sample_uniform_direction(rng);
  state.local_time_counter += out.counter_increment;
  ++state.step_index;

  Vec3 next = out.sample;
  const double r_next = next.norm();
  state.outer_gap = domain.outer_radius() - r_next;
  if (reflecting && r_next >= domain.outer_radius()) {
    next *= domain.outer_radius() / r_next;
    state.outer_gap = 0.0;
    BoundaryEvent event;
    event.point = next;
    const auto electrode = domain.electrode_at(next);
    event.region = electrode ? BoundaryRegion::robin(*electrode) : BoundaryRegion::neumann();
    event.local_time_increment = local_time_value(state.local_time_counter - state.last_counter, params);
    event.overshoot = r_next - domain.outer_radius();
    event.step_index = state.step_index;
    state.last_counter = state.local_time_counter;
    out.event = event;
  }
  state.position = next;
  state.anomaly_gap = domain.distance_to_anomaly(next);
  state.gaps_cached = true;

  if (state.anomaly_gap < params.absorption_shell) {
    const Vec3 offset = next - domain.anomaly_center();
    state.terminated = true;
    state.absorption_point = domain.anomaly_center() + domain.anomaly_radius() * offset.normalized();
    state.absorption_region = BoundaryRegion::anomaly();
    out.absorbed = true;
  } else if (!reflecting && state.outer_gap < params.absorption_shell) {
    state.terminated = true;
    state.absorption_point = project_to_outer_boundary(next, domain.outer_radius()).point;
    state.absorption_region = BoundaryRegion::outer_dirichlet();
    out.absorbed = true;
  }
  return out;
}

PathResult run_path(const Vec3& x0, const DomainSpec& domain, const BoundaryData& data,
                    const WalkParams& params, const Calibration& calibration, Rng& rng) {
  if (!domain.contains(x0)) {
    throw GeometryError("path start must lie strictly inside the domain");
  }
  PathResult result;
  WalkState state;
  state.position = x0;
  double weight = 1.0;

  auto absorb_if_in_shell = [&] {
    if (domain.has_anomaly() && domain.distance_to_anomaly(x0) < params.absorption_shell) {
      state.terminated = true;
      state.absorption_point =
          domain.anomaly_center() + domain.anomaly_radius() * (x0 - domain.anomaly_center()).normalized();
    } else if (domain.outer_condition() == OuterCondition::Absorbing &&
               domain.distance_to_outer(x0) < params.absorption_shell) {
      state.terminated = true;
      state.absorption_point = project_to_outer_boundary(x0, domain.outer_radius()).point;
    }
  };
  absorb_if_in_shell();

  auto score = [&](const Vec3& y, double local_time) {
    const auto electrode = domain.electrode_at(y);
    if (electrode) {
      const double kappa = data.kappa(*electrode);
      const double dl = calibration.robin * local_time;
      // Exact integral of exp(-kappa L) kappa phi1 dL across the increment.
      result.robin_sum += weight * data.phi1(*electrode, y) * -std::expm1(-kappa * dl);
      state.fk_exponent -= kappa * dl;
      weight = std::exp(state.fk_exponent);
    } else {
      result.neumann_sum += weight * data.phi2(y) * calibration.neumann * local_time;
    }
  };
  const bool beneath = params.scoring == LocalTimeScoring::Beneath;

  while (!state.terminated) {
    if (state.step_index >= params.max_steps) {
      result.hit_step_cap = true;
      break;
    }
    const Vec3 from = state.position;
    const StepOutcome step = wos_step(state, domain, params, rng);
    if (beneath && step.counter_increment > 0) {
      score(from.normalized(), local_time_value(step.counter_increment, params));
    }
    if (step.event) {
      ++result.boundary_events;
      if (!beneath) score(step.event->point, step.event->local_time_increment);
      if (result.boundary_events >= params.max_boundary_events) break;
    }
    if (weight < kNegligibleWeight) break;
  }

  if (state.terminated) {
    result.absorbed = true;
    result.dirichlet_value = weight * data.phi3(*state.absorption_point);
  } else {
    result.residual_weight = weight;
  }
  result.steps = state.step_index;
  return result;
}

}  // namespace pimc
