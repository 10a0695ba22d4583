#pragma once

#include <functional>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/estimate.hpp"
#include "ctrldiff/info.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/sde.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::girsanov {

enum class WeightKind { drift, observation, team_observation, team_coupling };

/// Log-space Girsanov weight.  Products over agents accumulate as sums of
/// per-agent log components; exponentiation happens only inside estimators.
struct LikelihoodWeight {
  double log_weight = 0.0;
  WeightKind kind = WeightKind::drift;
  std::vector<double> agent_log_components;  // team kinds only

  double value() const;
};

/// log Z_T for a path simulated under the driftless reference dynamics
/// dX' = sigma(X')dB with the same noise plan:
///   log Z_T = sum_j <sigma^{-1}(X_j) b(X_j,u_j), dB_j>
///           - 1/2 sum_j |sigma^{-1}(X_j) b(X_j,u_j)|^2 delta
/// over inner steps (left-endpoint Ito sums).  Throws NumericFailure if
/// sigma is singular at a path point.
LikelihoodWeight log_drift_weight(const sde::SamplePath& path, const DiffusionModel& model,
                                  const TimeGrid& grid);

/// log G_T = sum_j <g(X_j), dY_j> - 1/2 sum_j |g(X_j)|^2 delta, for
/// observation increments generated under the reference channel dY = dB.
LikelihoodWeight log_observation_weight(const std::vector<Vec>& x_states,
                                        const std::vector<Vec>& y_increments,
                                        const std::function<Vec(const Vec&)>& g,
                                        const TimeGrid& grid);

/// Product over agents of per-agent observation weights; the total log
/// weight is the sum of the per-agent components.
LikelihoodWeight log_team_observation_weight(
    const std::vector<Vec>& x_states,
    const std::vector<std::vector<Vec>>& y_increments,
    const std::vector<std::function<Vec(const Vec&)>>& gs, const TimeGrid& grid);

/// Coupling weight for team paths simulated under the decoupled dynamics:
/// per agent, Ito sums with integrand (sigma^i)^{-1}(X^i) b^i_0(X,U).
LikelihoodWeight log_coupling_weight(const std::vector<sde::SamplePath>& team_paths,
                                     const info::CoupledLocalStateTeamModel& model,
                                     const TimeGrid& grid);

/// Monte Carlo mean of Z_T over reference paths; 1 in expectation for any
/// bounded model (exponential-martingale identity).
EstimateWithError drift_martingale_check(const DiffusionModel& model,
                                         const policy::InterpolatedPolicy& pi,
                                         const TimeGrid& grid, const McOptions& opt,
                                         const Vec& x0);

/// Estimate of E[Z_T^2] against the analytic cap e^{MT} with
/// M = sup |sigma^{-1} b|^2 (probed over the given box and the action box).
struct SecondMomentReport {
  EstimateWithError z_squared;
  double m_bound = 0.0;
  double cap = 0.0;
  bool violation = false;  // estimate exceeds cap beyond 3 SE
};

SecondMomentReport second_moment_bound_check(const DiffusionModel& model,
                                             const policy::InterpolatedPolicy& pi,
                                             const TimeGrid& grid, const McOptions& opt,
                                             const Vec& x0, const Vec& probe_lo,
                                             const Vec& probe_hi, long probe_count = 4096);

/// Paired estimate of E|Z_T^a - Z_T^b|: both weights are evaluated on the
/// same reference paths (common noise plan and common policy randomization
/// per path index), so identical policies give exactly zero.
EstimateWithError weight_l1_distance(const policy::InterpolatedPolicy& pi_a,
                                     const policy::InterpolatedPolicy& pi_b,
                                     const DiffusionModel& model, const TimeGrid& grid,
                                     const McOptions& opt, const Vec& x0);

}  // namespace ctrldiff::girsanov
