#pragma once

#include "pimc/geometry.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace pimc {

using Rng = std::mt19937_64;

/// Independent generator for one path. The stream is a pure function of
/// (seed, stream, path) so results do not depend on how paths are scheduled.
Rng make_path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path);

/// Where shell-count local time is scored.
enum class LocalTimeScoring {
  /// Step by step, at the boundary point beneath the walker.
  Beneath,
  /// In one lump at the next exit, the count accumulated since the previous
  /// exit. Counts made before the walker wandered off through the interior
  /// land on whatever part of the boundary it returns to, which blurs
  /// piecewise boundary data by O(epsilon).
  NextExit,
};

/// Numerical parameters of the reflecting walk.
struct WalkParams {
  double epsilon = 0.01;          // width of the local-time shell
  double delta_x = 0.005;         // walk radius inside the shell
  int max_boundary_events = 2500;  // NP
  long n_paths = 200000;          // N
  std::uint64_t seed = 20240101;
  double absorption_shell = 1e-4;  // Dirichlet termination shell
  long max_steps = 1000000;        // per-path hard cap
  LocalTimeScoring scoring = LocalTimeScoring::Beneath;

  /// Throws std::invalid_argument when the parameters are inconsistent with
  /// each other or with the domain (the shell walk must not reach the anomaly).
  void validate(const DomainSpec& domain) const;
};

/// Factors turning the shell-count local time into the boundary measure used by
/// each Feynman-Kac term. The push a reflecting walk receives at the boundary
/// (the overshoot removed by the pull-back) is the discrete Skorohod
/// regulator, and long reflecting walks in the unit ball give
/// sum(overshoot) / sum(shell count local time) = 0.3895 at eps = 0.01,
/// dx = 0.005. That ratio still carries an O(dx) bias of order
/// E[overshoot^2] / E[overshoot], so each term is then pinned by one oracle
/// and frozen: annulus r0 = 0.6 at (0,0,0.8) read +0.66% high (Neumann),
/// Robin degree 2 at (0.9,0,0) read +0.50% high, i.e. +1.0% in the scale.
/// Both values belong to eps = 0.01, dx = 0.005.
struct Calibration {
  double robin = 0.3857;
  double neumann = 0.3870;
};

struct BoundaryEvent {
  Vec3 point;
  BoundaryRegion region;
  double local_time_increment = 0.0;
  /// How far the raw sample landed outside the sphere before the pull-back.
  double overshoot = 0.0;
  long step_index = 0;
};

struct WalkState {
  Vec3 position = Vec3::Zero();
  long step_index = 0;
  long local_time_counter = 0;  // n_t: weighted count of shell steps
  long last_counter = 0;        // n_t at the previous boundary event
  double fk_exponent = 0.0;     // -(integral of kappa dL) so far
  bool terminated = false;
  std::optional<Vec3> absorption_point;
  std::optional<BoundaryRegion> absorption_region;

  // Distances of `position` to the outer sphere and to the anomaly, kept
  // from the previous step so each step measures them once.
  bool gaps_cached = false;
  double outer_gap = 0.0;
  double anomaly_gap = 0.0;
};

/// What one walk-on-spheres step did.
struct StepOutcome {
  enum class Kind { Interior, Shell, ShellEnlarged };
  Kind kind = Kind::Interior;
  double radius = 0.0;
  int counter_increment = 0;
  bool absorbed = false;
  Vec3 sample;  // position drawn on the sphere before any pull-back
  std::optional<BoundaryEvent> event;
};

/// Uniformly distributed unit vector.
Vec3 sample_uniform_direction(Rng& rng);

/// Shell-count increment for a completed step: 0 outside the shell, 1 for a
/// radius-dx step in the shell and 4 for a radius-2dx step in the shell.
int local_time_increment(StepOutcome::Kind kind);

/// Local time carried by `counter_delta` shell counts: delta_n * dx^2 / (3 eps).
double local_time_value(long counter_delta, const WalkParams& params);

/// One walk-on-spheres move. Outside the shell the radius is the distance to
/// the shell (at least dx) or to the anomaly; inside it is dx, enlarged to 2dx
/// when the point is within dx of the outer sphere. A sample that leaves the
/// ball is pulled back radially and reported as a boundary event.
StepOutcome wos_step(WalkState& state, const DomainSpec& domain, const WalkParams& params, Rng& rng);

/// Feynman-Kac functionals accumulated along one path.
struct PathResult {
  double robin_sum = 0.0;
  double neumann_sum = 0.0;
  double dirichlet_value = 0.0;
  long boundary_events = 0;
  long steps = 0;
  bool absorbed = false;
  bool hit_step_cap = false;
  /// exp(fk_exponent) when the path stopped without being absorbed, else 0.
  double residual_weight = 0.0;

  double value() const { return robin_sum + neumann_sum + dirichlet_value; }
};

/// Runs a path from `x0` until NP boundary events, absorption or the step cap.
/// All three terms carry the Feynman-Kac weight exp(fk_exponent) accumulated
/// from the Robin local time up to that point.
PathResult run_path(const Vec3& x0, const DomainSpec& domain, const BoundaryData& data,
                    const WalkParams& params, const Calibration& calibration, Rng& rng);

}  // namespace pimc
