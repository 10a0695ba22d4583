#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/estimate.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::sde {

/// Brownian increments for one path: one N(0, delta) variate per inner step
/// and channel.  The table is a pure function of (master_seed, path_index,
/// stream); regeneration is bit-identical and distinct path indices give
/// independent streams.
struct NoisePlan {
  std::uint64_t master_seed = 0;
  long path_index = 0;
  std::uint64_t stream = 0;  // separates coexisting plans (W vs Y channels, agents)
  int channels = 0;
  long steps = 0;
  std::vector<double> table;  // row-major [step][channel]

  double inc(long step, int channel) const {
    return table[static_cast<std::size_t>(step) * channels + channel];
  }
  Vec increment(long step) const {
    Vec v(channels);
    for (int c = 0; c < channels; ++c) v[c] = inc(step, c);
    return v;
  }
  /// All-zero plan with the same shape (test fixtures).
  static NoisePlan zeros(const TimeGrid& grid, int channels);
};

NoisePlan sample_brownian(const TimeGrid& grid, int channels, std::uint64_t master_seed,
                          long path_index, std::uint64_t stream = 0);

/// One simulated trajectory on the inner grid plus the piecewise-constant
/// actions applied on each macro step.
struct SamplePath {
  std::vector<Vec> states;        // inner grid, size N_h * M + 1
  std::vector<Vec> actions;       // per macro step
  std::vector<int> action_index;  // per macro step, -1 when not grid-valued
  NoisePlan noise;
  long clamp_events = 0;  // out-of-box state-cell clamps seen by the policy
};

/// Euler-Maruyama on the inner grid under the controlled dynamics
/// X_{t+delta} = X_t + b(X_t,u_k) delta + sigma(X_t) dB, the action drawn
/// once per macro step from the policy and held.  Throws IntegrationFailure
/// (with the step index) if a state turns non-finite.
SamplePath simulate_path(const DiffusionModel& model, const policy::InterpolatedPolicy& pi,
                         const TimeGrid& grid, const NoisePlan& noise, const Vec& x0);

/// Same loop with the drift suppressed: the reference dynamics
/// dX' = sigma(X')dB.  Actions are still drawn and recorded (the policy reads
/// the reference path), so likelihood weights can be attached afterwards.
SamplePath simulate_reference_path(const DiffusionModel& model,
                                   const policy::InterpolatedPolicy& pi,
                                   const TimeGrid& grid, const NoisePlan& noise,
                                   const Vec& x0);

/// Twice-differentiable test function with supplied derivatives.
struct TestFunction {
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
};

/// Compactly supported C^2 bump profile on |x| <= radius multiplying a
/// quadratic-form payload; derivatives are analytic.  Standard simulator
/// diagnostic fixture.
TestFunction polynomial_bump(double radius, const Vec& quad_coeffs, double constant);

/// Monte Carlo estimate of E[f(X_T) - f(X_0) - int_0^T A^u f(X_s) ds] with
/// the generator A^u f = trace(a grad^2 f) + b . grad f, a = sigma sigma^T/2,
/// and the time integral evaluated by left-endpoint inner-grid quadrature.
/// Zero in expectation (up to O(delta) bias) for a correct simulator.
EstimateWithError dynkin_residual(const DiffusionModel& model,
                                  const policy::InterpolatedPolicy& pi,
                                  const TestFunction& f, const TimeGrid& grid,
                                  const McOptions& opt, const Vec& x0);

/// Largest E[|X_t|^2] over the inner grid (Monte Carlo), for the
/// bounded-coefficient moment check.
EstimateWithError max_second_moment(const DiffusionModel& model,
                                    const policy::InterpolatedPolicy& pi,
                                    const TimeGrid& grid, const McOptions& opt,
                                    const Vec& x0);

}  // namespace ctrldiff::sde
