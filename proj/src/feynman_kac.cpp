#include "pimc/feynman_kac.hpp"

#include <algorithm>
#include <cmath>

#include "pimc/parallel.hpp"
#include "pimc/quadrature.hpp"

namespace pimc {

namespace {

constexpr long kPathsPerBlock = 2048;

struct Job {
  Vec3 start;
  std::uint64_t stream;
  long n_paths;
};

// Per-block running moments, merged pairwise in a fixed order so the result
// does not depend on the number of workers.
struct Moments {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  long absorbed = 0;
  long capped = 0;
  double events = 0.0;
  double steps = 0.0;
  double residual = 0.0;

  void add(const PathResult& path) {
    ++n;
    const double v = path.value();
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
    absorbed += path.absorbed ? 1 : 0;
    capped += path.hit_step_cap ? 1 : 0;
    events += static_cast<double>(path.boundary_events);
    steps += static_cast<double>(path.steps);
    residual += path.residual_weight;
  }

  void merge(const Moments& other) {
    if (other.n == 0) return;
    const long total = n + other.n;
    const double delta = other.mean - mean;
    mean += delta * static_cast<double>(other.n) / static_cast<double>(total);
    m2 += other.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(other.n) /
                         static_cast<double>(total);
    n = total;
    absorbed += other.absorbed;
    capped += other.capped;
    events += other.events;
    steps += other.steps;
    residual += other.residual;
  }
};

std::vector<EstimatorResult> estimate_jobs(const std::vector<Job>& jobs, const DomainSpec& domain,
                                           const BoundaryData& data, const WalkParams& params,
                                           const Calibration& calibration, const SolverOptions& options) {
  params.validate(domain);
  data.validate(domain);
  // Flattened (job, block) task list; first_block[j] indexes job j's blocks.
  std::vector<std::size_t> first_block{0};
  for (const Job& job : jobs) {
    if (job.n_paths < 1) throw std::invalid_argument("every estimate needs at least one path");
    first_block.push_back(first_block.back() +
                          static_cast<std::size_t>((job.n_paths + kPathsPerBlock - 1) / kPathsPerBlock));
  }
  std::vector<Moments> partial(first_block.back());

  parallel_for(partial.size(), options.workers, [&](std::size_t task) {
    const std::size_t job =
        static_cast<std::size_t>(std::upper_bound(first_block.begin(), first_block.end(), task) -
                                 first_block.begin()) - 1;
    const long block = static_cast<long>(task - first_block[job]);
    const long first = block * kPathsPerBlock;
    const long last = std::min(jobs[job].n_paths, first + kPathsPerBlock);
    Moments& acc = partial[task];
    for (long path = first; path < last; ++path) {
      Rng rng = make_path_rng(params.seed, jobs[job].stream, static_cast<std::uint64_t>(path));
      acc.add(run_path(jobs[job].start, domain, data, params, calibration, rng));
    }
  });

  std::vector<EstimatorResult> out;
  out.reserve(jobs.size());
  for (std::size_t job = 0; job < jobs.size(); ++job) {
    Moments total;
    for (std::size_t b = first_block[job]; b < first_block[job + 1]; ++b) total.merge(partial[b]);
    if (total.capped == total.n) {
      throw NonTerminationError("every path hit the step cap of " + std::to_string(params.max_steps));
    }
    EstimatorResult r;
    r.n_paths = total.n;
    r.mean = total.mean;
    r.std_error = total.n > 1 ? std::sqrt(total.m2 / static_cast<double>(total.n - 1) /
                                          static_cast<double>(total.n))
                              : 0.0;
    r.n_absorbed = total.absorbed;
    r.n_step_capped = total.capped;
    r.mean_boundary_events = total.events / static_cast<double>(total.n);
    r.mean_steps = total.steps / static_cast<double>(total.n);
    r.mean_residual_weight = total.residual / static_cast<double>(total.n);
    out.push_back(r);
  }
  return out;
}

}  // namespace

Vec3 starting_point(const Vec3& x, const DomainSpec& domain, const WalkParams& params) {
  const double r = x.norm();
  const double outer = domain.outer_radius();
  if (r > outer * (1.0 + DomainSpec::kBoundaryTolerance)) {
    throw GeometryError("evaluation point lies outside the outer sphere");
  }
  if (r >= outer * (1.0 - DomainSpec::kBoundaryTolerance)) {
    return x * ((outer - 0.5 * params.epsilon) / r);
  }
  if (!domain.contains(x)) throw GeometryError("evaluation point lies outside the domain");
  return x;
}

EstimatorResult estimate_potential(const Vec3& x, const DomainSpec& domain, const BoundaryData& data,
                                   const WalkParams& params, const Calibration& calibration,
                                   const SolverOptions& options) {
  const std::vector<Job> jobs{{starting_point(x, domain, params), options.stream, params.n_paths}};
  return estimate_jobs(jobs, domain, data, params, calibration, options).front();
}

ElectrodeQuadrature electrode_quadrature(const Electrode& electrode, const QuadratureSpec& spec) {
  if (spec.rings < 1 || spec.sectors < 1) {
    throw std::invalid_argument("electrode quadrature needs at least one ring and one sector");
  }
  ElectrodeQuadrature q;
  q.electrode = electrode.id;
  const QuadratureRule radial = gauss_legendre(spec.rings, 0.0, electrode.cap_radius);
  const double dpsi = 2.0 * kPi / spec.sectors;
  for (int i = 0; i < spec.rings; ++i) {
    const double rho = radial.nodes[i];
    const double ring_weight = radial.weights[i] * std::sin(rho) * dpsi;
    for (int k = 0; k < spec.sectors; ++k) {
      const double psi = (k + 0.5) * dpsi;
      q.nodes.push_back(point_on_cap(electrode.center, rho, psi));
      q.weights.push_back(ring_weight);
    }
  }
  q.area = 2.0 * kPi * (1.0 - std::cos(electrode.cap_radius));
  return q;
}

std::vector<long> split_paths(long total, std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("cannot split paths over an empty rule");
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<long> out;
  out.reserve(weights.size());
  for (double w : weights) {
    out.push_back(std::max(1L, std::lround(static_cast<double>(total) * w / sum)));
  }
  return out;
}

std::uint64_t node_stream(int electrode, std::size_t node) {
  return (static_cast<std::uint64_t>(electrode) << 32) + static_cast<std::uint64_t>(node) + 1;
}

std::vector<EstimatorResult> electrode_potential_profile(int electrode, std::span<const Vec3> points,
                                                         const DomainSpec& domain, const BoundaryData& data,
                                                         const WalkParams& params,
                                                         const Calibration& calibration,
                                                         const SolverOptions& options) {
  std::vector<Job> jobs;
  jobs.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const BoundaryRegion region = domain.classify_boundary_point(points[i]);
    if (region != BoundaryRegion::robin(electrode)) {
      throw GeometryError("profile point " + std::to_string(i) + " is not on electrode " +
                          std::to_string(electrode));
    }
    jobs.push_back({starting_point(points[i], domain, params), node_stream(electrode, i), params.n_paths});
  }
  return estimate_jobs(jobs, domain, data, params, calibration, options);
}

CurrentEstimate current_from_potentials(const ElectrodeQuadrature& quadrature,
                                        std::span<const EstimatorResult> potentials,
                                        const BoundaryData& data, double inset) {
  if (quadrature.nodes.empty()) throw std::invalid_argument("electrode quadrature is empty");
  if (potentials.size() != quadrature.nodes.size()) {
    throw std::invalid_argument("one potential per quadrature node is required");
  }
  const int id = quadrature.electrode;
  if (!(inset >= 0.0)) throw std::invalid_argument("inset must be >= 0");
  const double kappa = data.kappa(id);
  // u(y - inset n) = u(y) - inset kappa (phi1 - u(y)) to first order.
  const double gain = kappa / (1.0 + inset * kappa);
  double weight_sum = 0.0;
  for (double w : quadrature.weights) weight_sum += w;

  CurrentEstimate out;
  double variance = 0.0;
  for (std::size_t i = 0; i < potentials.size(); ++i) {
    const double w = quadrature.weights[i] / weight_sum;
    const double flux = gain * (data.phi1(id, quadrature.nodes[i]) - potentials[i].mean);
    out.current += w * flux;
    const double s = w * gain * potentials[i].std_error;
    variance += s * s;
  }
  out.std_error = std::sqrt(variance);
  return out;
}

CurrentMap voltage_to_current_map(const DomainSpec& domain, const BoundaryData& data,
                                  const WalkParams& params, const QuadratureSpec& quadrature_spec,
                                  const Calibration& calibration, const SolverOptions& options) {
  if (domain.electrodes().empty()) throw GeometryError("the current map needs at least one electrode");
  std::vector<ElectrodeQuadrature> rules;
  std::vector<Job> jobs;
  for (const Electrode& e : domain.electrodes()) {
    rules.push_back(electrode_quadrature(e, quadrature_spec));
    const ElectrodeQuadrature& rule = rules.back();
    const std::vector<long> budget = split_paths(params.n_paths, rule.weights);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      jobs.push_back({starting_point(rule.nodes[i], domain, params), node_stream(e.id, i), budget[i]});
    }
  }
  const std::vector<EstimatorResult> estimates =
      estimate_jobs(jobs, domain, data, params, calibration, options);

  CurrentMap map;
  double total_variance = 0.0;
  double events = 0.0;
  double steps = 0.0;
  std::size_t offset = 0;
  for (const ElectrodeQuadrature& rule : rules) {
    const std::span<const EstimatorResult> slice(estimates.data() + offset, rule.nodes.size());
    const CurrentEstimate current = current_from_potentials(rule, slice, data, 0.5 * params.epsilon);
    long paths = 0;
    for (const EstimatorResult& r : slice) {
      paths += r.n_paths;
      map.n_absorbed += r.n_absorbed;
      map.n_step_capped += r.n_step_capped;
      events += r.mean_boundary_events * static_cast<double>(r.n_paths);
      steps += r.mean_steps * static_cast<double>(r.n_paths);
    }
    map.electrode_ids.push_back(rule.electrode);
    map.currents.push_back(current.current);
    map.std_errors.push_back(current.std_error);
    map.n_paths.push_back(paths);
    map.total += current.current;
    total_variance += current.std_error * current.std_error;
    offset += rule.nodes.size();
  }
  map.total_std_error = std::sqrt(total_variance);
  long all_paths = 0;
  for (long p : map.n_paths) all_paths += p;
  map.mean_boundary_events = events / static_cast<double>(all_paths);
  map.mean_steps = steps / static_cast<double>(all_paths);
  return map;
}

}  // namespace pimc
