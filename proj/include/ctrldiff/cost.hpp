#pragma once

#include <functional>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/estimate.hpp"
#include "ctrldiff/girsanov.hpp"
#include "ctrldiff/info.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/sde.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::cost {

/// Bounded nonnegative running + terminal cost over the horizon.  `actions`
/// carries one entry per agent (a single entry for one-agent problems); in
/// the coupled team model the state argument is the concatenated team state.
struct CostSpec {
  std::function<double(const Vec& state, const std::vector<Vec>& actions)> running;
  std::function<double(const Vec& state)> terminal;
  double running_cap = 1.0;
  double terminal_cap = 1.0;
  double horizon = 1.0;
};

/// Left-endpoint inner-grid quadrature of the running cost along a path
/// plus the terminal cost (single-agent actions).
double path_cost(const std::vector<Vec>& states, const std::vector<Vec>& actions,
                 const CostSpec& cost, const TimeGrid& grid);

/// E[int_0^T c dt + c_T(X_T)] along controlled paths.
EstimateWithError mc_cost_direct(const DiffusionModel& model,
                                 const policy::InterpolatedPolicy& pi, const CostSpec& cost,
                                 const TimeGrid& grid, const McOptions& opt, const Vec& x0);

/// Same functional through the transformed measure: paths simulated under
/// the driftless reference dynamics, each path cost multiplied by Z_T.
/// The self-normalized variant divides by the mean weight (variance
/// diagnostic only; the plain form is the model functional).
EstimateWithError mc_cost_reweighted(const DiffusionModel& model,
                                     const policy::InterpolatedPolicy& pi,
                                     const CostSpec& cost, const TimeGrid& grid,
                                     const McOptions& opt, const Vec& x0,
                                     bool self_normalized = false);

/// POMDP cost through the reference measure (Y a pure Brownian channel),
/// weighted by G_T.
EstimateWithError mc_cost_pomdp(const info::PartiallyObservedModel& model,
                                const policy::InterpolatedPolicy& pi, const CostSpec& cost,
                                const TimeGrid& grid, const McOptions& opt, const Vec& x0,
                                bool self_normalized = false);

/// Direct simulation of the original coupled POMDP (equivalence testing).
EstimateWithError mc_cost_pomdp_direct(const info::PartiallyObservedModel& model,
                                       const policy::InterpolatedPolicy& pi,
                                       const CostSpec& cost, const TimeGrid& grid,
                                       const McOptions& opt, const Vec& x0);

/// Team cost with per-agent observation weights prod_i G^i_T under the
/// decoupled-measurement reference model.
EstimateWithError mc_cost_team_local_meas(const info::LocalMeasurementTeamModel& model,
                                          const policy::TeamPolicyTuple& pis,
                                          const CostSpec& cost, const TimeGrid& grid,
                                          const McOptions& opt, const Vec& x0);

EstimateWithError mc_cost_team_local_meas_direct(const info::LocalMeasurementTeamModel& model,
                                                 const policy::TeamPolicyTuple& pis,
                                                 const CostSpec& cost, const TimeGrid& grid,
                                                 const McOptions& opt, const Vec& x0);

/// Team cost under decoupled local dynamics weighted by the coupling weight.
EstimateWithError mc_cost_team_coupled(const info::CoupledLocalStateTeamModel& model,
                                       const policy::TeamPolicyTuple& pis,
                                       const CostSpec& cost, const TimeGrid& grid,
                                       const McOptions& opt, const std::vector<Vec>& x0s);

EstimateWithError mc_cost_team_coupled_direct(const info::CoupledLocalStateTeamModel& model,
                                              const policy::TeamPolicyTuple& pis,
                                              const CostSpec& cost, const TimeGrid& grid,
                                              const McOptions& opt,
                                              const std::vector<Vec>& x0s);

/// One-step integrated running cost from x under the frozen action u:
/// c_hat(x,u) = E[int_0^h c(X_s,u) ds | X_0 = x], h split into m_inner
/// Euler steps.
EstimateWithError stage_cost_hat(const DiffusionModel& model, const Vec& x, const Vec& u,
                                 const CostSpec& cost, double h, int m_inner,
                                 const McOptions& opt);

}  // namespace ctrldiff::cost
