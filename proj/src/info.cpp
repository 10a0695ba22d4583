#include "ctrldiff/info.hpp"

#include <cmath>
#include <stdexcept>

namespace ctrldiff::info {

DiffusionModel CoupledLocalStateTeamModel::local_model(int agent) const {
  DiffusionModel m;
  m.state_dim = local_dim;
  m.action_dim = static_cast<int>(action_lo.at(static_cast<std::size_t>(agent)).size());
  m.drift = local_drift.at(static_cast<std::size_t>(agent));
  m.diffusion = diffusion.at(static_cast<std::size_t>(agent));
  m.drift_bound = drift_bound;
  m.ellipticity = ellipticity;
  m.action_lo = action_lo[static_cast<std::size_t>(agent)];
  m.action_hi = action_hi[static_cast<std::size_t>(agent)];
  return m;
}

namespace {

PomdpPathRecord run_pomdp(const PartiallyObservedModel& model,
                          const policy::InterpolatedPolicy& pi, const TimeGrid& grid,
                          const sde::NoisePlan& w_plan, const sde::NoisePlan& b_plan,
                          const Vec& x0, YCoupling coupling, bool observation_drift) {
  if (w_plan.steps != grid.inner_steps() || b_plan.steps != grid.inner_steps())
    throw std::invalid_argument("simulate_pomdp: noise plan does not match grid");
  if (w_plan.channels != model.state_dim || b_plan.channels != model.obs_dim)
    throw std::invalid_argument("simulate_pomdp: noise channel mismatch");

  PomdpPathRecord rec;
  rec.w_plan = w_plan;
  rec.b_plan = b_plan;
  rec.x_states.reserve(static_cast<std::size_t>(grid.inner_steps()) + 1);
  rec.x_states.push_back(x0);
  rec.y_increments.reserve(static_cast<std::size_t>(grid.inner_steps()));

  auto draws = pi.new_draws();
  const double delta = grid.delta();
  Vec x = x0;
  Vec y = Vec::Zero(model.obs_dim);
  for (int k = 0; k < grid.macro_steps; ++k) {
    rec.y_samples.push_back(y);
    policy::Information inf;
    inf.y_samples = &rec.y_samples;  // samples 0..k only exist at this point
    bool clamped = false;
    const int idx = pi.step_index(k, inf, draws, w_plan.master_seed, w_plan.path_index,
                                  &clamped);
    if (clamped) ++rec.clamp_events;
    const Vec u = pi.base().actions().action(idx);
    rec.actions.push_back(u);
    rec.action_index.push_back(idx);

    const Vec y_frozen = y;
    for (int m = 0; m < grid.inner_refine; ++m) {
      const long j = static_cast<long>(k) * grid.inner_refine + m;
      const Vec& y_arg = (coupling == YCoupling::freeze_macro) ? y_frozen : y;
      const Vec dw = w_plan.increment(j);
      const Vec db = b_plan.increment(j);
      Vec dy = db;
      if (observation_drift) dy += model.g(x) * delta;
      const Vec x_next = x + model.drift(x, y_arg, u) * delta + model.diffusion(x, y_arg) * dw;
      if (!x_next.allFinite())
        throw IntegrationFailure("simulate_pomdp: non-finite state", j);
      rec.y_increments.push_back(dy);
      y += dy;
      x = x_next;
      rec.x_states.push_back(x);
    }
  }
  rec.y_samples.push_back(y);
  return rec;
}

TeamLocalPathRecord run_team_local(const LocalMeasurementTeamModel& model,
                                   const policy::TeamPolicyTuple& pis, const TimeGrid& grid,
                                   const sde::NoisePlan& w_plan,
                                   const std::vector<sde::NoisePlan>& b_plans, const Vec& x0,
                                   YCoupling coupling, bool observation_drift) {
  const int N = model.agents;
  if (static_cast<int>(b_plans.size()) != N || pis.agents() != N)
    throw std::invalid_argument("simulate_team_local_meas: agent count mismatch");

  TeamLocalPathRecord rec;
  rec.w_plan = w_plan;
  rec.b_plans = b_plans;
  rec.x_states.push_back(x0);
  rec.y_samples.resize(static_cast<std::size_t>(N));
  rec.y_increments.resize(static_cast<std::size_t>(N));
  rec.actions.resize(static_cast<std::size_t>(N));
  rec.action_index.resize(static_cast<std::size_t>(N));

  std::vector<policy::InterpolatedPolicy> lifted;
  std::vector<policy::InterpolatedPolicy::PathDraws> draws;
  for (int i = 0; i < N; ++i) {
    lifted.emplace_back(pis.members[static_cast<std::size_t>(i)], grid);
    draws.push_back(lifted.back().new_draws());
  }

  const double delta = grid.delta();
  Vec x = x0;
  std::vector<Vec> ys(static_cast<std::size_t>(N), Vec::Zero(model.obs_dim));
  for (int k = 0; k < grid.macro_steps; ++k) {
    std::vector<Vec> us;
    for (int i = 0; i < N; ++i) {
      auto& samples = rec.y_samples[static_cast<std::size_t>(i)];
      samples.push_back(ys[static_cast<std::size_t>(i)]);
      // Agent i reads only agent i's samples.
      policy::Information inf;
      inf.y_samples = &samples;
      inf.agent = i;
      bool clamped = false;
      const int idx = lifted[static_cast<std::size_t>(i)].step_index(
          k, inf, draws[static_cast<std::size_t>(i)], w_plan.master_seed,
          w_plan.path_index, &clamped);
      if (clamped) ++rec.clamp_events;
      rec.action_index[static_cast<std::size_t>(i)].push_back(idx);
      rec.actions[static_cast<std::size_t>(i)].push_back(
          pis.member(i).actions().action(idx));
      us.push_back(rec.actions[static_cast<std::size_t>(i)].back());
    }

    const std::vector<Vec> ys_frozen = ys;
    for (int m = 0; m < grid.inner_refine; ++m) {
      const long j = static_cast<long>(k) * grid.inner_refine + m;
      const std::vector<Vec>& y_arg = (coupling == YCoupling::freeze_macro) ? ys_frozen : ys;
      const Vec dw = w_plan.increment(j);
      const Vec x_next =
          x + model.drift(x, y_arg, us) * delta + model.diffusion(x, y_arg) * dw;
      if (!x_next.allFinite())
        throw IntegrationFailure("simulate_team_local_meas: non-finite state", j);
      for (int i = 0; i < N; ++i) {
        Vec dy = b_plans[static_cast<std::size_t>(i)].increment(j);
        if (observation_drift) dy += model.g[static_cast<std::size_t>(i)](x) * delta;
        rec.y_increments[static_cast<std::size_t>(i)].push_back(dy);
        ys[static_cast<std::size_t>(i)] += dy;
      }
      x = x_next;
      rec.x_states.push_back(x);
    }
  }
  for (int i = 0; i < N; ++i)
    rec.y_samples[static_cast<std::size_t>(i)].push_back(ys[static_cast<std::size_t>(i)]);
  return rec;
}

std::vector<sde::SamplePath> run_team_coupled(const CoupledLocalStateTeamModel& model,
                                              const policy::TeamPolicyTuple& pis,
                                              const TimeGrid& grid,
                                              const std::vector<sde::NoisePlan>& plans,
                                              const std::vector<Vec>& x0s,
                                              bool with_coupling) {
  const int N = model.agents;
  if (static_cast<int>(plans.size()) != N || pis.agents() != N ||
      static_cast<int>(x0s.size()) != N)
    throw std::invalid_argument("simulate_team_coupled: agent count mismatch");

  std::vector<sde::SamplePath> paths(static_cast<std::size_t>(N));
  std::vector<policy::InterpolatedPolicy> lifted;
  std::vector<policy::InterpolatedPolicy::PathDraws> draws;
  for (int i = 0; i < N; ++i) {
    paths[static_cast<std::size_t>(i)].noise = plans[static_cast<std::size_t>(i)];
    paths[static_cast<std::size_t>(i)].states.push_back(x0s[static_cast<std::size_t>(i)]);
    lifted.emplace_back(pis.members[static_cast<std::size_t>(i)], grid);
    draws.push_back(lifted.back().new_draws());
  }

  const double delta = grid.delta();
  std::vector<Vec> xs = x0s;
  for (int k = 0; k < grid.macro_steps; ++k) {
    std::vector<Vec> us;
    for (int i = 0; i < N; ++i) {
      // Agent i reads only its local state.
      policy::Information inf;
      inf.state = &xs[static_cast<std::size_t>(i)];
      inf.agent = i;
      bool clamped = false;
      const int idx = lifted[static_cast<std::size_t>(i)].step_index(
          k, inf, draws[static_cast<std::size_t>(i)],
          plans[static_cast<std::size_t>(i)].master_seed,
          plans[static_cast<std::size_t>(i)].path_index, &clamped);
      if (clamped) ++paths[static_cast<std::size_t>(i)].clamp_events;
      paths[static_cast<std::size_t>(i)].action_index.push_back(idx);
      paths[static_cast<std::size_t>(i)].actions.push_back(
          pis.member(i).actions().action(idx));
      us.push_back(paths[static_cast<std::size_t>(i)].actions.back());
    }

    for (int m = 0; m < grid.inner_refine; ++m) {
      const long j = static_cast<long>(k) * grid.inner_refine + m;
      std::vector<Vec> next(static_cast<std::size_t>(N));
      for (int i = 0; i < N; ++i) {
        const Vec& xi = xs[static_cast<std::size_t>(i)];
        Vec b = model.local_drift[static_cast<std::size_t>(i)](
            xi, us[static_cast<std::size_t>(i)]);
        if (with_coupling) b += model.coupling[static_cast<std::size_t>(i)](xs, us);
        const Vec db = plans[static_cast<std::size_t>(i)].increment(j);
        next[static_cast<std::size_t>(i)] =
            xi + b * delta + model.diffusion[static_cast<std::size_t>(i)](xi) * db;
        if (!next[static_cast<std::size_t>(i)].allFinite())
          throw IntegrationFailure("simulate_team_coupled: non-finite state", j);
      }
      xs = std::move(next);
      for (int i = 0; i < N; ++i)
        paths[static_cast<std::size_t>(i)].states.push_back(xs[static_cast<std::size_t>(i)]);
    }
  }
  return paths;
}

}  // namespace

PomdpPathRecord simulate_pomdp_reference(const PartiallyObservedModel& model,
                                         const policy::InterpolatedPolicy& pi,
                                         const TimeGrid& grid,
                                         const sde::NoisePlan& w_plan,
                                         const sde::NoisePlan& b_plan, const Vec& x0,
                                         YCoupling coupling) {
  return run_pomdp(model, pi, grid, w_plan, b_plan, x0, coupling,
                   /*observation_drift=*/false);
}

PomdpPathRecord simulate_pomdp_direct(const PartiallyObservedModel& model,
                                      const policy::InterpolatedPolicy& pi,
                                      const TimeGrid& grid, const sde::NoisePlan& w_plan,
                                      const sde::NoisePlan& b_plan, const Vec& x0,
                                      YCoupling coupling) {
  return run_pomdp(model, pi, grid, w_plan, b_plan, x0, coupling,
                   /*observation_drift=*/true);
}

TeamLocalPathRecord simulate_team_local_meas_reference(
    const LocalMeasurementTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const sde::NoisePlan& w_plan,
    const std::vector<sde::NoisePlan>& b_plans, const Vec& x0, YCoupling coupling) {
  return run_team_local(model, pis, grid, w_plan, b_plans, x0, coupling,
                        /*observation_drift=*/false);
}

TeamLocalPathRecord simulate_team_local_meas_direct(
    const LocalMeasurementTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const sde::NoisePlan& w_plan,
    const std::vector<sde::NoisePlan>& b_plans, const Vec& x0, YCoupling coupling) {
  return run_team_local(model, pis, grid, w_plan, b_plans, x0, coupling,
                        /*observation_drift=*/true);
}

std::vector<sde::SamplePath> simulate_team_decoupled(
    const CoupledLocalStateTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const std::vector<sde::NoisePlan>& plans,
    const std::vector<Vec>& x0s) {
  return run_team_coupled(model, pis, grid, plans, x0s, /*with_coupling=*/false);
}

std::vector<sde::SamplePath> simulate_team_coupled_direct(
    const CoupledLocalStateTeamModel& model, const policy::TeamPolicyTuple& pis,
    const TimeGrid& grid, const std::vector<sde::NoisePlan>& plans,
    const std::vector<Vec>& x0s) {
  return run_team_coupled(model, pis, grid, plans, x0s, /*with_coupling=*/true);
}

AuditReport independence_audit(const AuditBatch& batch) {
  const long n = static_cast<long>(batch.actions.size());
  if (n < 1) throw std::invalid_argument("independence_audit: empty batch");
  if (batch.increments.size() != batch.actions.size())
    throw std::invalid_argument("independence_audit: batch size mismatch");
  const int steps = static_cast<int>(batch.actions.front().size());
  const int macros = static_cast<int>(batch.increments.front().size());
  const int channels = macros > 0 ? static_cast<int>(batch.increments.front().front().size()) : 0;

  AuditReport rep;
  rep.n = n;
  rep.threshold = 3.0 / std::sqrt(static_cast<double>(n));

  for (int k = 0; k < steps; ++k) {
    // action column k
    std::vector<double> a(static_cast<std::size_t>(n));
    for (long p = 0; p < n; ++p)
      a[static_cast<std::size_t>(p)] =
          static_cast<double>(batch.actions[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]);
    const double a_mean = pairwise_sum(a) / static_cast<double>(n);
    double a_var = 0.0;
    for (double v : a) a_var += (v - a_mean) * (v - a_mean);

    for (int m = k; m < macros; ++m) {
      for (int c = 0; c < channels; ++c) {
        ++rep.pairs_checked;
        double corr = 0.0;
        if (a_var > 0.0) {
          std::vector<double> b(static_cast<std::size_t>(n));
          for (long p = 0; p < n; ++p)
            b[static_cast<std::size_t>(p)] =
                batch.increments[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)]
                                [static_cast<std::size_t>(c)];
          const double b_mean = pairwise_sum(b) / static_cast<double>(n);
          double b_var = 0.0, cov = 0.0;
          for (long p = 0; p < n; ++p) {
            const double da = a[static_cast<std::size_t>(p)] - a_mean;
            const double db = b[static_cast<std::size_t>(p)] - b_mean;
            b_var += db * db;
            cov += da * db;
          }
          if (b_var > 0.0) corr = cov / std::sqrt(a_var * b_var);
        }
        if (std::abs(corr) > rep.threshold)
          rep.flags.push_back(AuditFlag{k, m, c, corr});
      }
    }
  }
  return rep;
}

}  // namespace ctrldiff::info
