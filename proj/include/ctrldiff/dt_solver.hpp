#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/cost.hpp"
#include "ctrldiff/estimate.hpp"
#include "ctrldiff/info.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::dt {

/// Sampled finite-horizon control problem: state cells, action grid, an
/// estimated time-homogeneous transition kernel, the stage cost table
/// c_hat(cell, action) and the terminal cost table.
struct DiscreteControlProblem {
  int horizon_steps = 1;
  policy::StateCells cells;
  policy::ActionGrid actions;
  std::vector<std::vector<std::vector<double>>> kernel;  // [cell][action][next cell]
  std::vector<std::vector<double>> stage_cost;           // [cell][action]
  std::vector<double> terminal_cost;                     // [cell]
  long kernel_samples = 0;  // samples behind every kernel row
  long min_samples = 200;

  /// Kernel rows sum to 1 within row_eps, costs finite and nonnegative,
  /// rows backed by at least min_samples samples.
  void validate(double row_eps = 1e-9) const;
};

/// Optimal cost-to-go per (step, cell); layer N equals the terminal table.
struct ValueTable {
  std::vector<std::vector<double>> v;  // [k][cell], k = 0..N
};

enum class KernelStart { cell_center, cell_uniform };

/// Estimates the sampled MDP: for each (cell, action), n_kernel one-step
/// simulations from the cell (center by default) with the action frozen give
/// the empirical next-cell row; the stage cost comes from stage_cost_hat at
/// the cell center and the terminal table from c_T at cell centers.
DiscreteControlProblem build_discrete_mdp(const DiffusionModel& model,
                                          const policy::StateCells& cells,
                                          const policy::ActionGrid& actions,
                                          const TimeGrid& grid, long n_kernel,
                                          const cost::CostSpec& cost, std::uint64_t seed,
                                          int workers = 1,
                                          KernelStart start = KernelStart::cell_center,
                                          long min_samples = 200);

/// Finite-horizon dynamic programming:
///   V_N = terminal,  V_k(x) = min_u [ c_hat(x,u) + sum_x' P(x'|x,u) V_{k+1}(x') ].
/// Ties resolve to the lowest action index; the returned policy is
/// deterministic (point-mass rows).
std::pair<ValueTable, policy::MarkovTablePolicy> backward_induction(
    const DiscreteControlProblem& problem);

struct SolveResult {
  DiscreteControlProblem problem;
  ValueTable values;
  policy::InterpolatedPolicy lifted;
  double optimal_value = 0.0;  // J* at the cell containing x0
  long initial_cell = 0;
};

/// build_discrete_mdp -> backward_induction -> interpolate.
SolveResult solve_and_lift(const DiffusionModel& model, const cost::CostSpec& cost,
                           const policy::StateCells& cells,
                           const policy::ActionGrid& actions, const TimeGrid& grid,
                           long n_kernel, std::uint64_t seed, const Vec& x0,
                           int workers = 1);

/// Size guard for the finite policy-class enumerations.
struct EnumGuard {
  int max_steps = 3;
  int max_levels = 3;
  long max_actions = 3;
  long max_candidates = 4096;
};

struct WideSenseEnumResult {
  std::shared_ptr<policy::WideSensePolicy> best;
  EstimateWithError value;
  long candidates = 0;
};

/// Exhaustively evaluates every deterministic map (k, history code) ->
/// action through mc_cost_pomdp with common noise across candidates and
/// returns the minimizer (lowest lexicographic assignment on ties).
WideSenseEnumResult enumerate_wide_sense(const info::PartiallyObservedModel& model,
                                         const cost::CostSpec& cost, const TimeGrid& grid,
                                         const policy::ObservationQuantizer& quantizer,
                                         const policy::ActionGrid& actions,
                                         const McOptions& opt, const Vec& x0,
                                         const EnumGuard& guard = {});

struct OpenLoopEnumResult {
  std::shared_ptr<policy::OpenLoopPolicy> best;
  EstimateWithError value;
  long candidates = 0;
};

/// Best deterministic open-loop action sequence under the same evaluator
/// (the information-value baseline).
OpenLoopEnumResult enumerate_open_loop(const info::PartiallyObservedModel& model,
                                       const cost::CostSpec& cost, const TimeGrid& grid,
                                       const policy::ActionGrid& actions,
                                       const McOptions& opt, const Vec& x0,
                                       const EnumGuard& guard = {});

/// All deterministic Markov table policies over (steps, cells, actions),
/// in lexicographic assignment order.  `stationary` shares one cell->action
/// map across steps.
std::vector<std::shared_ptr<const policy::DiscretePolicy>> enumerate_markov_tables(
    const policy::ActionGrid& actions, const policy::StateCells& cells, int steps,
    bool stationary, long max_candidates = 100000);

/// All deterministic wide-sense policies keyed by the most recent
/// `history_len` observation samples, in lexicographic assignment order.
std::vector<std::shared_ptr<const policy::DiscretePolicy>> enumerate_wide_sense_tables(
    const policy::ActionGrid& actions, const policy::ObservationQuantizer& quantizer,
    int steps, int history_len, long max_candidates = 100000);

struct TeamEnumResult {
  policy::TeamPolicyTuple best;
  EstimateWithError value;
  long evaluated = 0;
};

/// Evaluates every policy tuple in the product of per-agent classes with the
/// supplied evaluator (which must use common noise) and returns the
/// minimizing tuple; ties resolve to the lexicographically first tuple.
TeamEnumResult team_brute_force(
    const std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>>& classes,
    const std::function<EstimateWithError(const policy::TeamPolicyTuple&)>& evaluate,
    long guard = 10000);

}  // namespace ctrldiff::dt
