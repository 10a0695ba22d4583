#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/estimate.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/sde.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::info {

/// Within-step treatment of the measurement argument of b and sigma: the
/// sampled models freeze Y at the macro-step left endpoint (default); the
/// co-evolving variant advances it on the inner grid.
enum class YCoupling { freeze_macro, co_evolve };

/// Hidden diffusion with an additive-noise observation channel
/// dY = g(X)dt + dB.  Bounds are declared and verified by sampling.
struct PartiallyObservedModel {
  int state_dim = 1;
  int obs_dim = 1;
  int action_dim = 1;
  std::function<Vec(const Vec& x, const Vec& y, const Vec& u)> drift;
  std::function<Mat(const Vec& x, const Vec& y)> diffusion;
  std::function<Vec(const Vec& x)> g;
  double drift_bound = 1.0;
  double ellipticity = 0.1;
  double g_bound = 1.0;
  Vec action_lo, action_hi;
};

/// Shared state, per-agent observation channels dY^i = g^i(X)dt + dB^i.
struct LocalMeasurementTeamModel {
  int agents = 1;
  int state_dim = 1;
  int obs_dim = 1;
  std::function<Vec(const Vec& x, const std::vector<Vec>& ys, const std::vector<Vec>& us)> drift;
  std::function<Mat(const Vec& x, const std::vector<Vec>& ys)> diffusion;
  std::vector<std::function<Vec(const Vec& x)>> g;  // one map per agent
  double drift_bound = 1.0;
  double ellipticity = 0.1;
  std::vector<double> g_bound;
  std::vector<Vec> action_lo, action_hi;  // per agent
};

/// Per-agent local states with a coupling drift:
/// dX^i = b^i(X^i,U^i)dt + b^i_0(X,U)dt + sigma^i(X^i)dB^i.
struct CoupledLocalStateTeamModel {
  int agents = 1;
  int local_dim = 1;
  std::vector<DriftFn> local_drift;  // b^i(x_i, u_i)
  std::vector<std::function<Vec(const std::vector<Vec>& xs, const std::vector<Vec>& us)>>
      coupling;                      // b^i_0(all states, all actions)
  std::vector<DiffusionFn> diffusion;
  double drift_bound = 1.0;
  double coupling_bound = 1.0;
  double ellipticity = 0.1;
  std::vector<Vec> action_lo, action_hi;  // per agent

  /// Agent i viewed alone as a fully observed model (coupling excluded).
  DiffusionModel local_model(int agent) const;
};

struct PomdpPathRecord {
  std::vector<Vec> x_states;      // inner grid, N_h*M + 1
  std::vector<Vec> y_samples;     // macro boundaries, N_h + 1 (Y_0 = 0)
  std::vector<Vec> y_increments;  // inner grid
  std::vector<Vec> actions;       // per macro step
  std::vector<int> action_index;
  sde::NoisePlan w_plan, b_plan;
  long clamp_events = 0;
};

/// Reference-measure POMDP path: X integrated with drift b(X,Y,u) while the
/// observation channel is pure Brownian (dY = dB).  The policy reads only
/// samples with index <= k.
PomdpPathRecord simulate_pomdp_reference(const PartiallyObservedModel& model,
                                         const policy::InterpolatedPolicy& pi,
                                         const TimeGrid& grid,
                                         const sde::NoisePlan& w_plan,
                                         const sde::NoisePlan& b_plan, const Vec& x0,
                                         YCoupling coupling = YCoupling::freeze_macro);

/// The original coupled dynamics (dY = g(X)dt + dB); provided for
/// equivalence testing against the reference-measure estimator.
PomdpPathRecord simulate_pomdp_direct(const PartiallyObservedModel& model,
                                      const policy::InterpolatedPolicy& pi,
                                      const TimeGrid& grid, const sde::NoisePlan& w_plan,
                                      const sde::NoisePlan& b_plan, const Vec& x0,
                                      YCoupling coupling = YCoupling::freeze_macro);

struct TeamLocalPathRecord {
  std::vector<Vec> x_states;
  std::vector<std::vector<Vec>> y_samples;     // [agent][macro]
  std::vector<std::vector<Vec>> y_increments;  // [agent][inner]
  std::vector<std::vector<Vec>> actions;       // [agent][macro]
  std::vector<std::vector<int>> action_index;
  sde::NoisePlan w_plan;
  std::vector<sde::NoisePlan> b_plans;
  long clamp_events = 0;
};

/// Reference-measure team path with decoupled measurements dY^i = dB^i;
/// agent i's actions are computed from agent i's samples only.
TeamLocalPathRecord simulate_team_local_meas_reference(
    const LocalMeasurementTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const sde::NoisePlan& w_plan,
    const std::vector<sde::NoisePlan>& b_plans, const Vec& x0,
    YCoupling coupling = YCoupling::freeze_macro);

/// Original coupled-measurement dynamics, for equivalence testing.
TeamLocalPathRecord simulate_team_local_meas_direct(
    const LocalMeasurementTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const sde::NoisePlan& w_plan,
    const std::vector<sde::NoisePlan>& b_plans, const Vec& x0,
    YCoupling coupling = YCoupling::freeze_macro);

/// Decoupled team dynamics dX^i = b^i(X^i,U^i)dt + sigma^i(X^i)dB^i; the
/// coupling drift is excluded here and accounted for by the coupling weight.
/// Agent i's policy reads agent i's local state only.
std::vector<sde::SamplePath> simulate_team_decoupled(
    const CoupledLocalStateTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const std::vector<sde::NoisePlan>& plans,
    const std::vector<Vec>& x0s);

/// Original coupled dynamics (local + coupling drift), for equivalence tests.
std::vector<sde::SamplePath> simulate_team_coupled_direct(
    const CoupledLocalStateTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const std::vector<sde::NoisePlan>& plans,
    const std::vector<Vec>& x0s);

// ---------------------------------------------------------------------------
// Independence audit

/// Per-path action indices and macro-aggregated driving increments collected
/// from a batch of simulations.
struct AuditBatch {
  std::vector<std::vector<int>> actions;  // [path][step]
  std::vector<std::vector<std::vector<double>>> increments;  // [path][macro][channel]
};

struct AuditFlag {
  int action_step = 0;
  int future_macro = 0;
  int channel = 0;
  double correlation = 0.0;
};

/// For every action step k, future macro interval j >= k and channel,
/// the empirical correlation between the step-k action index and the
/// aggregated increment over [jh,(j+1)h); entries beyond 3/sqrt(n) flag.
/// Degenerate (constant) action columns correlate as exactly zero.
struct AuditReport {
  double threshold = 0.0;
  long n = 0;
  long pairs_checked = 0;
  std::vector<AuditFlag> flags;
  bool pass() const { return flags.empty(); }
};

AuditReport independence_audit(const AuditBatch& batch);

}  // namespace ctrldiff::info
