#pragma once

#include "pimc/geometry.hpp"
#include "pimc/stochastic.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pimc {

/// Every path of an estimate reached the hard step cap.
class NonTerminationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  unsigned workers = 0;      // 0 = hardware concurrency
  std::uint64_t stream = 0;  // path-stream id for single-point estimates
};

struct EstimatorResult {
  double mean = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  long n_absorbed = 0;
  long n_step_capped = 0;
  double mean_boundary_events = 0.0;
  double mean_steps = 0.0;
  /// Feynman-Kac weight still carried by paths stopped before absorption;
  /// times sup|data| it bounds the truncation bias of the mean.
  double mean_residual_weight = 0.0;
};

/// Starting point actually used for `x`: points on the outer sphere move
/// inward by epsilon/2.
Vec3 starting_point(const Vec3& x, const DomainSpec& domain, const WalkParams& params);

/// Monte Carlo estimate of u(x) from params.n_paths independent paths.
EstimatorResult estimate_potential(const Vec3& x, const DomainSpec& domain, const BoundaryData& data,
                                   const WalkParams& params, const Calibration& calibration = {},
                                   const SolverOptions& options = {});

/// Polar quadrature on a cap: Gauss-Legendre in geodesic radius (weight
/// sin rho) times uniform sectors in azimuth.
struct QuadratureSpec {
  int rings = 6;
  int sectors = 12;
};

struct ElectrodeQuadrature {
  int electrode = 0;
  std::vector<Vec3> nodes;
  std::vector<double> weights;  // surface-area weights; they sum to the cap area
  double area = 0.0;
};

ElectrodeQuadrature electrode_quadrature(const Electrode& electrode, const QuadratureSpec& spec);

/// Path counts proportional to `weights` with about `total` paths overall
/// and at least one per node.
std::vector<long> split_paths(long total, std::span<const double> weights);

/// Stream id used for quadrature node `node` of electrode `electrode`.
std::uint64_t node_stream(int electrode, std::size_t node);

/// Independent estimates at points of electrode `electrode`; point i uses
/// stream node_stream(electrode, i).
std::vector<EstimatorResult> electrode_potential_profile(int electrode, std::span<const Vec3> points,
                                                         const DomainSpec& domain, const BoundaryData& data,
                                                         const WalkParams& params,
                                                         const Calibration& calibration = {},
                                                         const SolverOptions& options = {});

struct CurrentEstimate {
  double current = 0.0;
  double std_error = 0.0;
};

/// Average normal flux over the cap, with the flux at each node recovered from
/// the Robin condition as kappa_l (phi1 - u). `inset` is how far inside the
/// sphere the potentials were estimated; the Robin condition carries them
/// back to the surface to first order, giving kappa (phi1 - u) / (1 + inset kappa).
CurrentEstimate current_from_potentials(const ElectrodeQuadrature& quadrature,
                                        std::span<const EstimatorResult> potentials,
                                        const BoundaryData& data, double inset = 0.0);

struct CurrentMap {
  std::vector<int> electrode_ids;
  std::vector<double> currents;
  std::vector<double> std_errors;
  std::vector<long> n_paths;
  double total = 0.0;
  double total_std_error = 0.0;
  long n_absorbed = 0;
  long n_step_capped = 0;
  double mean_boundary_events = 0.0;
  double mean_steps = 0.0;
};

/// Currents on every electrode. params.n_paths is the budget per electrode,
/// shared among its quadrature nodes by split_paths.
CurrentMap voltage_to_current_map(const DomainSpec& domain, const BoundaryData& data,
                                  const WalkParams& params, const QuadratureSpec& quadrature = {},
                                  const Calibration& calibration = {}, const SolverOptions& options = {});

}  // namespace pimc
