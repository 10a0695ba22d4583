#pragma once

// Shared builders for the unit and acceptance suites.

#include <cmath>
#include <memory>
#include <vector>

#include "ctrldiff/cost.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/sde.hpp"
#include "ctrldiff/time_grid.hpp"

namespace testsupport {

using namespace ctrldiff;

inline DiffusionModel model_1d(std::function<double(double, double)> drift,
                               std::function<double(double)> sigma, double bound = 1.0,
                               double ellipticity = 0.25) {
  DiffusionModel m;
  m.state_dim = 1;
  m.action_dim = 1;
  m.drift = [drift](const Vec& x, const Vec& u) { return vec1(drift(x[0], u[0])); };
  m.diffusion = [sigma](const Vec& x) {
    Mat s(1, 1);
    s(0, 0) = sigma(x[0]);
    return s;
  };
  m.drift_bound = bound;
  m.ellipticity = ellipticity;
  m.action_lo = vec1(-1.0);
  m.action_hi = vec1(1.0);
  return m;
}

inline DiffusionModel tanh_model() {
  return model_1d([](double x, double u) { return u * std::tanh(x); },
                  [](double) { return 1.0; });
}

inline DiffusionModel zero_drift_model() {
  return model_1d([](double, double) { return 0.0; }, [](double) { return 1.0; });
}

inline policy::ActionGrid grid_pm1(int levels = 3) {
  return policy::quantize_actions(vec1(-1.0), vec1(1.0), {levels});
}

inline policy::InterpolatedPolicy constant_policy(const TimeGrid& grid, long index = 0,
                                                  int levels = 3) {
  auto base = std::make_shared<policy::OpenLoopPolicy>(
      policy::OpenLoopPolicy::constant(grid_pm1(levels), grid.macro_steps, index));
  return policy::interpolate(base, grid);
}

inline policy::InterpolatedPolicy uniform_policy(const TimeGrid& grid, int levels = 3) {
  const auto g = grid_pm1(levels);
  policy::WeightRow row(static_cast<std::size_t>(g.size()),
                        1.0 / static_cast<double>(g.size()));
  auto base = std::make_shared<policy::OpenLoopPolicy>(
      g, std::vector<policy::WeightRow>(static_cast<std::size_t>(grid.macro_steps), row));
  return policy::interpolate(base, grid);
}

inline cost::CostSpec cost_1d(std::function<double(double, double)> running,
                              std::function<double(double)> terminal, double T,
                              double run_cap = 10.0, double term_cap = 10.0) {
  cost::CostSpec c;
  c.horizon = T;
  c.running = [running](const Vec& x, const std::vector<Vec>& us) {
    return running(x[0], us[0][0]);
  };
  c.terminal = [terminal](const Vec& x) { return terminal(x[0]); };
  c.running_cap = run_cap;
  c.terminal_cap = term_cap;
  return c;
}

inline cost::CostSpec zero_cost(double T) {
  return cost_1d([](double, double) { return 0.0; }, [](double) { return 0.0; }, T, 0.0, 0.0);
}

}  // namespace testsupport
