#include "ctrldiff/cost.hpp"

#include <cmath>
#include <stdexcept>

#include "ctrldiff/rng.hpp"

namespace ctrldiff::cost {

namespace {

void check_grid(const CostSpec& cost, const TimeGrid& grid) {
  if (cost.horizon != grid.horizon)
    throw std::invalid_argument("cost horizon does not match time grid");
}

EstimateWithError self_normalize(const std::vector<double>& weighted,
                                 const std::vector<double>& weights) {
  // Ratio estimator with a delta-method standard error.
  const long n = static_cast<long>(weighted.size());
  const double wbar = pairwise_sum(weights) / static_cast<double>(n);
  const double r = pairwise_sum(weighted) / static_cast<double>(n) / wbar;
  std::vector<double> residual(weighted.size());
  for (long i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const double d = (weighted[s] - r * weights[s]) / wbar;
    residual[s] = d * d;
  }
  EstimateWithError e;
  e.n = n;
  e.mean = r;
  e.standard_error =
      n > 1 ? std::sqrt(pairwise_sum(residual) /
                        (static_cast<double>(n) * static_cast<double>(n - 1)))
            : 0.0;
  return e;
}

}  // namespace

double path_cost(const std::vector<Vec>& states, const std::vector<Vec>& actions,
                 const CostSpec& cost, const TimeGrid& grid) {
  const double delta = grid.delta();
  double integral = 0.0;
  std::vector<Vec> act(1);
  for (long j = 0; j < grid.inner_steps(); ++j) {
    act[0] = actions[static_cast<std::size_t>(grid.macro_of(j))];
    integral += cost.running(states[static_cast<std::size_t>(j)], act) * delta;
  }
  return integral + cost.terminal(states.back());
}

EstimateWithError mc_cost_direct(const DiffusionModel& model,
                                 const policy::InterpolatedPolicy& pi, const CostSpec& cost,
                                 const TimeGrid& grid, const McOptions& opt, const Vec& x0) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise = sde::sample_brownian(grid, model.state_dim, opt.seed, p);
    const sde::SamplePath path = sde::simulate_path(model, pi, grid, noise, x0);
    return path_cost(path.states, path.actions, cost, grid);
  });
  return summarize(values);
}

EstimateWithError mc_cost_reweighted(const DiffusionModel& model,
                                     const policy::InterpolatedPolicy& pi,
                                     const CostSpec& cost, const TimeGrid& grid,
                                     const McOptions& opt, const Vec& x0,
                                     bool self_normalized) {
  check_grid(cost, grid);
  std::vector<double> weighted(static_cast<std::size_t>(opt.n_paths));
  std::vector<double> weights(static_cast<std::size_t>(opt.n_paths));
  parallel_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise = sde::sample_brownian(grid, model.state_dim, opt.seed, p);
    const sde::SamplePath path = sde::simulate_reference_path(model, pi, grid, noise, x0);
    const double z = girsanov::log_drift_weight(path, model, grid).value();
    weights[static_cast<std::size_t>(p)] = z;
    weighted[static_cast<std::size_t>(p)] = z * path_cost(path.states, path.actions, cost, grid);
  });
  return self_normalized ? self_normalize(weighted, weights) : summarize(weighted);
}

EstimateWithError mc_cost_pomdp(const info::PartiallyObservedModel& model,
                                const policy::InterpolatedPolicy& pi, const CostSpec& cost,
                                const TimeGrid& grid, const McOptions& opt, const Vec& x0,
                                bool self_normalized) {
  check_grid(cost, grid);
  std::vector<double> weighted(static_cast<std::size_t>(opt.n_paths));
  std::vector<double> weights(static_cast<std::size_t>(opt.n_paths));
  parallel_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan w_plan = sde::sample_brownian(grid, model.state_dim, opt.seed, p, 0);
    const sde::NoisePlan b_plan = sde::sample_brownian(grid, model.obs_dim, opt.seed, p, 1);
    const auto rec = info::simulate_pomdp_reference(model, pi, grid, w_plan, b_plan, x0);
    const double g =
        girsanov::log_observation_weight(rec.x_states, rec.y_increments, model.g, grid)
            .value();
    weights[static_cast<std::size_t>(p)] = g;
    weighted[static_cast<std::size_t>(p)] =
        g * path_cost(rec.x_states, rec.actions, cost, grid);
  });
  return self_normalized ? self_normalize(weighted, weights) : summarize(weighted);
}

EstimateWithError mc_cost_pomdp_direct(const info::PartiallyObservedModel& model,
                                       const policy::InterpolatedPolicy& pi,
                                       const CostSpec& cost, const TimeGrid& grid,
                                       const McOptions& opt, const Vec& x0) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan w_plan = sde::sample_brownian(grid, model.state_dim, opt.seed, p, 0);
    const sde::NoisePlan b_plan = sde::sample_brownian(grid, model.obs_dim, opt.seed, p, 1);
    const auto rec = info::simulate_pomdp_direct(model, pi, grid, w_plan, b_plan, x0);
    return path_cost(rec.x_states, rec.actions, cost, grid);
  });
  return summarize(values);
}

namespace {

double team_local_path_cost(const info::TeamLocalPathRecord& rec, const CostSpec& cost,
                            const TimeGrid& grid) {
  const double delta = grid.delta();
  const int N = static_cast<int>(rec.actions.size());
  std::vector<Vec> act(static_cast<std::size_t>(N));
  double integral = 0.0;
  for (long j = 0; j < grid.inner_steps(); ++j) {
    const int k = grid.macro_of(j);
    for (int i = 0; i < N; ++i)
      act[static_cast<std::size_t>(i)] =
          rec.actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    integral += cost.running(rec.x_states[static_cast<std::size_t>(j)], act) * delta;
  }
  return integral + cost.terminal(rec.x_states.back());
}

std::vector<sde::NoisePlan> team_obs_plans(const info::LocalMeasurementTeamModel& model,
                                           const TimeGrid& grid, std::uint64_t seed, long p) {
  std::vector<sde::NoisePlan> plans;
  for (int i = 0; i < model.agents; ++i)
    plans.push_back(sde::sample_brownian(grid, model.obs_dim, seed, p,
                                         static_cast<std::uint64_t>(1 + i)));
  return plans;
}

Vec concat_states(const std::vector<sde::SamplePath>& paths, long j) {
  long dim = 0;
  for (const auto& path : paths) dim += path.states.front().size();
  Vec x(dim);
  long at = 0;
  for (const auto& path : paths) {
    const Vec& xi = path.states[static_cast<std::size_t>(j)];
    x.segment(at, xi.size()) = xi;
    at += xi.size();
  }
  return x;
}

double team_coupled_path_cost(const std::vector<sde::SamplePath>& paths,
                              const CostSpec& cost, const TimeGrid& grid) {
  const double delta = grid.delta();
  const int N = static_cast<int>(paths.size());
  std::vector<Vec> act(static_cast<std::size_t>(N));
  double integral = 0.0;
  for (long j = 0; j < grid.inner_steps(); ++j) {
    const int k = grid.macro_of(j);
    for (int i = 0; i < N; ++i)
      act[static_cast<std::size_t>(i)] =
          paths[static_cast<std::size_t>(i)].actions[static_cast<std::size_t>(k)];
    integral += cost.running(concat_states(paths, j), act) * delta;
  }
  return integral + cost.terminal(concat_states(paths, grid.inner_steps()));
}

}  // namespace

EstimateWithError mc_cost_team_local_meas(const info::LocalMeasurementTeamModel& model,
                                          const policy::TeamPolicyTuple& pis,
                                          const CostSpec& cost, const TimeGrid& grid,
                                          const McOptions& opt, const Vec& x0) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan w_plan = sde::sample_brownian(grid, model.state_dim, opt.seed, p, 0);
    const auto b_plans = team_obs_plans(model, grid, opt.seed, p);
    const auto rec =
        info::simulate_team_local_meas_reference(model, pis, grid, w_plan, b_plans, x0);
    const double g =
        girsanov::log_team_observation_weight(rec.x_states, rec.y_increments, model.g, grid)
            .value();
    return g * team_local_path_cost(rec, cost, grid);
  });
  return summarize(values);
}

EstimateWithError mc_cost_team_local_meas_direct(const info::LocalMeasurementTeamModel& model,
                                                 const policy::TeamPolicyTuple& pis,
                                                 const CostSpec& cost, const TimeGrid& grid,
                                                 const McOptions& opt, const Vec& x0) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan w_plan = sde::sample_brownian(grid, model.state_dim, opt.seed, p, 0);
    const auto b_plans = team_obs_plans(model, grid, opt.seed, p);
    const auto rec =
        info::simulate_team_local_meas_direct(model, pis, grid, w_plan, b_plans, x0);
    return team_local_path_cost(rec, cost, grid);
  });
  return summarize(values);
}

EstimateWithError mc_cost_team_coupled(const info::CoupledLocalStateTeamModel& model,
                                       const policy::TeamPolicyTuple& pis,
                                       const CostSpec& cost, const TimeGrid& grid,
                                       const McOptions& opt, const std::vector<Vec>& x0s) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    std::vector<sde::NoisePlan> plans;
    for (int i = 0; i < model.agents; ++i)
      plans.push_back(sde::sample_brownian(grid, model.local_dim, opt.seed, p,
                                           static_cast<std::uint64_t>(i)));
    const auto paths = info::simulate_team_decoupled(model, pis, grid, plans, x0s);
    const double w = girsanov::log_coupling_weight(paths, model, grid).value();
    return w * team_coupled_path_cost(paths, cost, grid);
  });
  return summarize(values);
}

EstimateWithError mc_cost_team_coupled_direct(const info::CoupledLocalStateTeamModel& model,
                                              const policy::TeamPolicyTuple& pis,
                                              const CostSpec& cost, const TimeGrid& grid,
                                              const McOptions& opt,
                                              const std::vector<Vec>& x0s) {
  check_grid(cost, grid);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    std::vector<sde::NoisePlan> plans;
    for (int i = 0; i < model.agents; ++i)
      plans.push_back(sde::sample_brownian(grid, model.local_dim, opt.seed, p,
                                           static_cast<std::uint64_t>(i)));
    const auto paths = info::simulate_team_coupled_direct(model, pis, grid, plans, x0s);
    return team_coupled_path_cost(paths, cost, grid);
  });
  return summarize(values);
}

EstimateWithError stage_cost_hat(const DiffusionModel& model, const Vec& x, const Vec& u,
                                 const CostSpec& cost, double h, int m_inner,
                                 const McOptions& opt) {
  const TimeGrid step_grid(h, 1, m_inner);
  const double delta = step_grid.delta();
  std::vector<Vec> act(1, u);
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise =
        sde::sample_brownian(step_grid, model.state_dim, opt.seed, p);
    Vec state = x;
    double integral = 0.0;
    for (int j = 0; j < m_inner; ++j) {
      integral += cost.running(state, act) * delta;
      state = state + model.drift(state, u) * delta + model.diffusion(state) * noise.increment(j);
      if (!state.allFinite())
        throw IntegrationFailure("stage_cost_hat: non-finite state", j);
    }
    return integral;
  });
  return summarize(values);
}

}  // namespace ctrldiff::cost
