#pragma once

#include "pimc/config.hpp"
#include "report.hpp"

namespace pimc::cli {

/// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,    // oracle-check or compare found a violated tolerance
  kConfigError = 2,    // bad flags or config file
  kNumericFailure = 3, // solver refused or failed (mesh, LU, GMRES, geometry)
  kNonTermination = 4, // every path hit the step cap
};

Report cmd_solve_point(const RunConfig& config);
Report cmd_map(const RunConfig& config);
Report cmd_bem(const RunConfig& config);
/// Electrode problems: per-electrode relative error of the path-integral
/// currents against the boundary element reference; fails above 1%.
/// Oracle problems: both solvers against the exact value at `point`.
Report cmd_compare(const RunConfig& config);
/// Closed-form suite through both solvers; fails if any |z| > 4 or any
/// boundary element error exceeds 1e-2.
Report cmd_oracle_check(const RunConfig& config);

}  // namespace pimc::cli
