#include "ctrldiff/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "ctrldiff/rng.hpp"

namespace ctrldiff::sde {

NoisePlan NoisePlan::zeros(const TimeGrid& grid, int channels) {
  NoisePlan p;
  p.channels = channels;
  p.steps = grid.inner_steps();
  p.table.assign(static_cast<std::size_t>(p.steps) * channels, 0.0);
  return p;
}

NoisePlan sample_brownian(const TimeGrid& grid, int channels, std::uint64_t master_seed,
                          long path_index, std::uint64_t stream) {
  if (channels < 1) throw std::invalid_argument("sample_brownian: channels >= 1");
  NoisePlan p;
  p.master_seed = master_seed;
  p.path_index = path_index;
  p.stream = stream;
  p.channels = channels;
  p.steps = grid.inner_steps();
  p.table.resize(static_cast<std::size_t>(p.steps) * channels);
  const double sqrt_delta = std::sqrt(grid.delta());
  const std::uint64_t seed = rng::derive(master_seed, stream);
  for (long j = 0; j < p.steps; ++j)
    for (int c = 0; c < channels; ++c)
      p.table[static_cast<std::size_t>(j) * channels + c] =
          sqrt_delta * rng::normal(seed, rng::Stream::brownian,
                                   static_cast<std::uint64_t>(path_index),
                                   static_cast<std::uint64_t>(j),
                                   static_cast<std::uint64_t>(c));
  return p;
}

namespace {

SamplePath integrate(const DiffusionModel& model, const policy::InterpolatedPolicy& pi,
                     const TimeGrid& grid, const NoisePlan& noise, const Vec& x0,
                     bool with_drift) {
  if (noise.steps != grid.inner_steps())
    throw std::invalid_argument("simulate_path: noise plan does not match grid");
  if (noise.channels != model.state_dim)
    throw std::invalid_argument("simulate_path: noise channels != state_dim");
  if (x0.size() != model.state_dim)
    throw std::invalid_argument("simulate_path: x0 dimension mismatch");

  SamplePath path;
  path.noise = noise;
  path.states.reserve(static_cast<std::size_t>(grid.inner_steps()) + 1);
  path.states.push_back(x0);
  path.actions.reserve(static_cast<std::size_t>(grid.macro_steps));
  path.action_index.reserve(static_cast<std::size_t>(grid.macro_steps));

  auto draws = pi.new_draws();
  const double delta = grid.delta();
  Vec x = x0;
  for (int k = 0; k < grid.macro_steps; ++k) {
    policy::Information info;
    info.state = &x;
    bool clamped = false;
    const int idx = pi.step_index(k, info, draws, noise.master_seed, noise.path_index,
                                  &clamped);
    if (clamped) ++path.clamp_events;
    const Vec u = pi.base().actions().action(idx);
    path.actions.push_back(u);
    path.action_index.push_back(idx);
    for (int m = 0; m < grid.inner_refine; ++m) {
      const long j = static_cast<long>(k) * grid.inner_refine + m;
      const Vec db = noise.increment(j);
      if (with_drift) {
        x = x + model.drift(x, u) * delta + model.diffusion(x) * db;
      } else {
        x = x + model.diffusion(x) * db;
      }
      if (!x.allFinite())
        throw IntegrationFailure("simulate_path: non-finite state", j);
      path.states.push_back(x);
    }
  }
  return path;
}

}  // namespace

SamplePath simulate_path(const DiffusionModel& model, const policy::InterpolatedPolicy& pi,
                         const TimeGrid& grid, const NoisePlan& noise, const Vec& x0) {
  return integrate(model, pi, grid, noise, x0, /*with_drift=*/true);
}

SamplePath simulate_reference_path(const DiffusionModel& model,
                                   const policy::InterpolatedPolicy& pi,
                                   const TimeGrid& grid, const NoisePlan& noise,
                                   const Vec& x0) {
  return integrate(model, pi, grid, noise, x0, /*with_drift=*/false);
}

TestFunction polynomial_bump(double radius, const Vec& quad_coeffs, double constant) {
  // f(x) = B(r^2) * (c + sum_d q_d x_d^2) with B(s) = (1 - s/R^2)^3 on s <= R^2.
  // B is C^2 at the boundary; all derivatives vanish outside |x| <= R.
  const double r2max = radius * radius;
  auto bump = [r2max](double s) {
    const double z = 1.0 - s / r2max;
    return z > 0.0 ? z * z * z : 0.0;
  };
  auto dbump = [r2max](double s) {
    const double z = 1.0 - s / r2max;
    return z > 0.0 ? -3.0 * z * z / r2max : 0.0;
  };
  auto ddbump = [r2max](double s) {
    const double z = 1.0 - s / r2max;
    return z > 0.0 ? 6.0 * z / (r2max * r2max) : 0.0;
  };
  const Vec q = quad_coeffs;
  TestFunction tf;
  tf.f = [=](const Vec& x) {
    const double s = x.squaredNorm();
    double payload = constant;
    for (long d = 0; d < q.size(); ++d) payload += q[d] * x[d] * x[d];
    return bump(s) * payload;
  };
  tf.grad = [=](const Vec& x) {
    const double s = x.squaredNorm();
    double payload = constant;
    for (long d = 0; d < q.size(); ++d) payload += q[d] * x[d] * x[d];
    Vec g = Vec::Zero(x.size());
    if (bump(s) == 0.0 && dbump(s) == 0.0) return g;
    for (long d = 0; d < x.size(); ++d)
      g[d] = dbump(s) * 2.0 * x[d] * payload + bump(s) * 2.0 * q[d] * x[d];
    return g;
  };
  tf.hess = [=](const Vec& x) {
    const double s = x.squaredNorm();
    double payload = constant;
    for (long d = 0; d < q.size(); ++d) payload += q[d] * x[d] * x[d];
    Mat h = Mat::Zero(x.size(), x.size());
    if (bump(s) == 0.0 && dbump(s) == 0.0 && ddbump(s) == 0.0) return h;
    for (long i = 0; i < x.size(); ++i) {
      for (long j = 0; j < x.size(); ++j) {
        double v = ddbump(s) * 4.0 * x[i] * x[j] * payload +
                   dbump(s) * 2.0 * x[i] * 2.0 * q[j] * x[j] +
                   dbump(s) * 2.0 * x[j] * 2.0 * q[i] * x[i];
        if (i == j) v += dbump(s) * 2.0 * payload + bump(s) * 2.0 * q[i];
        h(i, j) = v;
      }
    }
    return h;
  };
  return tf;
}

EstimateWithError dynkin_residual(const DiffusionModel& model,
                                  const policy::InterpolatedPolicy& pi,
                                  const TestFunction& f, const TimeGrid& grid,
                                  const McOptions& opt, const Vec& x0) {
  const double delta = grid.delta();
  auto values = map_paths(opt.n_paths, opt.workers, [&](long p) {
    const NoisePlan noise = sample_brownian(grid, model.state_dim, opt.seed, p);
    const SamplePath path = simulate_path(model, pi, grid, noise, x0);
    double integral = 0.0;
    for (long j = 0; j < grid.inner_steps(); ++j) {
      const Vec& x = path.states[static_cast<std::size_t>(j)];
      const Vec& u = path.actions[static_cast<std::size_t>(grid.macro_of(j))];
      const Mat sigma = model.diffusion(x);
      const Mat a = 0.5 * sigma * sigma.transpose();
      const double gen = (a.cwiseProduct(f.hess(x))).sum() + model.drift(x, u).dot(f.grad(x));
      integral += gen * delta;
    }
    return f.f(path.states.back()) - f.f(path.states.front()) - integral;
  });
  return summarize(values);
}

EstimateWithError max_second_moment(const DiffusionModel& model,
                                    const policy::InterpolatedPolicy& pi,
                                    const TimeGrid& grid, const McOptions& opt,
                                    const Vec& x0) {
  const long n_grid = grid.inner_steps() + 1;
  std::vector<std::vector<double>> sq(static_cast<std::size_t>(n_grid));
  for (auto& v : sq) v.resize(static_cast<std::size_t>(opt.n_paths));
  parallel_paths(opt.n_paths, opt.workers, [&](long p) {
    const NoisePlan noise = sample_brownian(grid, model.state_dim, opt.seed, p);
    const SamplePath path = simulate_path(model, pi, grid, noise, x0);
    for (long j = 0; j < n_grid; ++j)
      sq[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)] =
          path.states[static_cast<std::size_t>(j)].squaredNorm();
  });
  EstimateWithError best;
  for (const auto& v : sq) {
    const EstimateWithError e = summarize(v);
    if (e.mean > best.mean) best = e;
  }
  best.n = opt.n_paths;
  return best;
}

}  // namespace ctrldiff::sde
