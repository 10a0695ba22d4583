#include "ctrldiff/girsanov.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

#include "ctrldiff/rng.hpp"

namespace ctrldiff::girsanov {

double LikelihoodWeight::value() const { return std::exp(log_weight); }

namespace {

/// sigma(x)^{-1} v with a singularity check at the given step index.
Vec solve_sigma(const Mat& sigma, const Vec& v, long step) {
  Eigen::FullPivLU<Mat> lu(sigma);
  if (!lu.isInvertible())
    throw NumericFailure("girsanov: singular diffusion matrix along path", step);
  return lu.solve(v);
}

double ito_log_sum(const std::vector<Vec>& states, long steps, double delta,
                   const std::function<Vec(const Vec&, long)>& integrand,
                   const std::function<Vec(long)>& increment) {
  double log_w = 0.0;
  for (long j = 0; j < steps; ++j) {
    const Vec alpha = integrand(states[static_cast<std::size_t>(j)], j);
    log_w += alpha.dot(increment(j)) - 0.5 * alpha.squaredNorm() * delta;
  }
  return log_w;
}

}  // namespace

LikelihoodWeight log_drift_weight(const sde::SamplePath& path, const DiffusionModel& model,
                                  const TimeGrid& grid) {
  if (static_cast<long>(path.states.size()) != grid.inner_steps() + 1)
    throw std::invalid_argument("log_drift_weight: path does not match grid");
  LikelihoodWeight w;
  w.kind = WeightKind::drift;
  w.log_weight = ito_log_sum(
      path.states, grid.inner_steps(), grid.delta(),
      [&](const Vec& x, long j) {
        const Vec& u = path.actions[static_cast<std::size_t>(grid.macro_of(j))];
        return solve_sigma(model.diffusion(x), model.drift(x, u), j);
      },
      [&](long j) { return path.noise.increment(j); });
  return w;
}

LikelihoodWeight log_observation_weight(const std::vector<Vec>& x_states,
                                        const std::vector<Vec>& y_increments,
                                        const std::function<Vec(const Vec&)>& g,
                                        const TimeGrid& grid) {
  if (static_cast<long>(x_states.size()) != grid.inner_steps() + 1 ||
      static_cast<long>(y_increments.size()) != grid.inner_steps())
    throw std::invalid_argument("log_observation_weight: path/increment length mismatch");
  LikelihoodWeight w;
  w.kind = WeightKind::observation;
  w.log_weight = ito_log_sum(
      x_states, grid.inner_steps(), grid.delta(),
      [&](const Vec& x, long) { return g(x); },
      [&](long j) { return y_increments[static_cast<std::size_t>(j)]; });
  if (!std::isfinite(w.log_weight))
    throw NumericFailure("log_observation_weight: non-finite log weight", grid.inner_steps());
  return w;
}

LikelihoodWeight log_team_observation_weight(
    const std::vector<Vec>& x_states, const std::vector<std::vector<Vec>>& y_increments,
    const std::vector<std::function<Vec(const Vec&)>>& gs, const TimeGrid& grid) {
  if (y_increments.size() != gs.size())
    throw std::invalid_argument("log_team_observation_weight: agent count mismatch");
  LikelihoodWeight w;
  w.kind = WeightKind::team_observation;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const LikelihoodWeight wi =
        log_observation_weight(x_states, y_increments[i], gs[i], grid);
    w.agent_log_components.push_back(wi.log_weight);
    w.log_weight += wi.log_weight;
  }
  return w;
}

LikelihoodWeight log_coupling_weight(const std::vector<sde::SamplePath>& team_paths,
                                     const info::CoupledLocalStateTeamModel& model,
                                     const TimeGrid& grid) {
  const int N = model.agents;
  if (static_cast<int>(team_paths.size()) != N)
    throw std::invalid_argument("log_coupling_weight: agent count mismatch");
  LikelihoodWeight w;
  w.kind = WeightKind::team_coupling;
  const double delta = grid.delta();
  std::vector<Vec> xs(static_cast<std::size_t>(N));
  std::vector<Vec> us(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) w.agent_log_components.push_back(0.0);
  for (long j = 0; j < grid.inner_steps(); ++j) {
    const int k = grid.macro_of(j);
    for (int i = 0; i < N; ++i) {
      xs[static_cast<std::size_t>(i)] =
          team_paths[static_cast<std::size_t>(i)].states[static_cast<std::size_t>(j)];
      us[static_cast<std::size_t>(i)] =
          team_paths[static_cast<std::size_t>(i)].actions[static_cast<std::size_t>(k)];
    }
    for (int i = 0; i < N; ++i) {
      const Vec b0 = model.coupling[static_cast<std::size_t>(i)](xs, us);
      const Vec alpha = solve_sigma(
          model.diffusion[static_cast<std::size_t>(i)](xs[static_cast<std::size_t>(i)]),
          b0, j);
      const Vec db = team_paths[static_cast<std::size_t>(i)].noise.increment(j);
      w.agent_log_components[static_cast<std::size_t>(i)] +=
          alpha.dot(db) - 0.5 * alpha.squaredNorm() * delta;
    }
  }
  for (double c : w.agent_log_components) w.log_weight += c;
  return w;
}

EstimateWithError drift_martingale_check(const DiffusionModel& model,
                                         const policy::InterpolatedPolicy& pi,
                                         const TimeGrid& grid, const McOptions& opt,
                                         const Vec& x0) {
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise = sde::sample_brownian(grid, model.state_dim, opt.seed, p);
    const sde::SamplePath path = sde::simulate_reference_path(model, pi, grid, noise, x0);
    return log_drift_weight(path, model, grid).value();
  });
  return summarize(values);
}

SecondMomentReport second_moment_bound_check(const DiffusionModel& model,
                                             const policy::InterpolatedPolicy& pi,
                                             const TimeGrid& grid, const McOptions& opt,
                                             const Vec& x0, const Vec& probe_lo,
                                             const Vec& probe_hi, long probe_count) {
  SecondMomentReport rep;
  // M = sup |sigma^{-1} b|^2, probed over the state box and the action box.
  Vec x(model.state_dim), u(model.action_dim);
  for (long p = 0; p < probe_count; ++p) {
    for (int d = 0; d < model.state_dim; ++d) {
      const double t = rng::uniform01(opt.seed, rng::Stream::probe, p, 2, d);
      x[d] = probe_lo[d] + t * (probe_hi[d] - probe_lo[d]);
    }
    for (int d = 0; d < model.action_dim; ++d) {
      const double t = rng::uniform01(opt.seed, rng::Stream::probe, p, 3, d);
      u[d] = model.action_lo[d] + t * (model.action_hi[d] - model.action_lo[d]);
    }
    const Vec ratio = solve_sigma(model.diffusion(x), model.drift(x, u), p);
    rep.m_bound = std::max(rep.m_bound, ratio.squaredNorm());
  }
  rep.cap = std::exp(rep.m_bound * grid.horizon);

  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise = sde::sample_brownian(grid, model.state_dim, opt.seed, p);
    const sde::SamplePath path = sde::simulate_reference_path(model, pi, grid, noise, x0);
    const double z = log_drift_weight(path, model, grid).value();
    return z * z;
  });
  rep.z_squared = summarize(values);
  rep.violation = rep.z_squared.mean > rep.cap + 3.0 * rep.z_squared.standard_error;
  return rep;
}

EstimateWithError weight_l1_distance(const policy::InterpolatedPolicy& pi_a,
                                     const policy::InterpolatedPolicy& pi_b,
                                     const DiffusionModel& model, const TimeGrid& grid,
                                     const McOptions& opt, const Vec& x0) {
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const sde::NoisePlan noise = sde::sample_brownian(grid, model.state_dim, opt.seed, p);
    // The reference states are policy-free, so one simulation serves both
    // policies; b's actions are re-drawn over the same states from the same
    // per-path uniform stream (coupled draws).
    sde::SamplePath path = sde::simulate_reference_path(model, pi_a, grid, noise, x0);
    const double za = log_drift_weight(path, model, grid).value();

    auto draws_b = pi_b.new_draws();
    for (int k = 0; k < grid.macro_steps; ++k) {
      const Vec& x_at_k =
          path.states[static_cast<std::size_t>(k) * grid.inner_refine];
      policy::Information inf;
      inf.state = &x_at_k;
      const int idx = pi_b.step_index(k, inf, draws_b, noise.master_seed, noise.path_index);
      path.action_index[static_cast<std::size_t>(k)] = idx;
      path.actions[static_cast<std::size_t>(k)] = pi_b.base().actions().action(idx);
    }
    const double zb = log_drift_weight(path, model, grid).value();
    return std::abs(za - zb);
  });
  return summarize(values);
}

}  // namespace ctrldiff::girsanov
