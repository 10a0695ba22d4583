#include "ctrldiff/fixtures.hpp"

#include <cmath>
#include <stdexcept>

namespace ctrldiff::fixtures {

namespace {

using nlohmann::json;

double param(const json& p, const char* key, double fallback) {
  if (p.contains(key)) return p.at(key).get<double>();
  return fallback;
}

double capped_square(double x, double cap) { return std::min(x * x, cap); }

Mat identity1() { return Mat::Identity(1, 1); }

cost::CostSpec quadratic_capped_cost(double T, double action_weight, double cap) {
  cost::CostSpec c;
  c.horizon = T;
  c.running = [action_weight, cap](const Vec& x, const std::vector<Vec>& us) {
    double penalty = 0.0;
    for (const Vec& u : us) penalty += action_weight * u.squaredNorm();
    return capped_square(x[0], cap) + penalty;
  };
  c.terminal = [cap](const Vec& x) { return capped_square(x[0], cap); };
  c.running_cap = cap + action_weight * 2.0;
  c.terminal_cap = cap;
  return c;
}

Fixture tanh_drift(const json& p) {
  const double T = param(p, "T", 1.0);
  const double u_scale = param(p, "u_scale", 1.0);
  Fixture f;
  f.name = "tanh_drift";
  DiffusionModel m;
  m.state_dim = 1;
  m.action_dim = 1;
  m.drift = [u_scale](const Vec& x, const Vec& u) {
    return vec1(u_scale * u[0] * std::tanh(x[0]));
  };
  m.diffusion = [](const Vec&) { return identity1(); };
  m.drift_bound = std::max(1.0, u_scale);
  m.ellipticity = 0.25;
  m.action_lo = vec1(-1.0);
  m.action_hi = vec1(1.0);
  f.diffusion = m;
  f.cost = quadratic_capped_cost(T, 0.1, 4.0);
  f.x0 = vec1(param(p, "x0", 1.0));
  f.state_box_lo = vec1(-2.25);
  f.state_box_hi = vec1(2.25);
  return f;
}

Fixture const_drift(const json& p) {
  const double T = param(p, "T", 1.0);
  const double mu = param(p, "mu", 0.8);
  Fixture f;
  f.name = "const_drift";
  DiffusionModel m;
  m.state_dim = 1;
  m.action_dim = 1;
  m.drift = [mu](const Vec&, const Vec&) { return vec1(mu); };
  m.diffusion = [](const Vec&) { return identity1(); };
  m.drift_bound = std::max(1.0, std::abs(mu));
  m.ellipticity = 0.25;
  m.action_lo = vec1(-1.0);
  m.action_hi = vec1(1.0);
  f.diffusion = m;
  f.cost = quadratic_capped_cost(T, 0.0, 4.0);
  f.x0 = vec1(param(p, "x0", 0.0));
  f.state_box_lo = vec1(-3.0);
  f.state_box_hi = vec1(3.0);
  return f;
}

Fixture pomdp_bounded_g(const json& p) {
  const double T = param(p, "T", 1.0);
  const double g_scale = param(p, "g_scale", 0.8);
  Fixture f;
  f.name = "pomdp_bounded_g";
  info::PartiallyObservedModel m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.action_dim = 1;
  m.drift = [](const Vec& x, const Vec& y, const Vec& u) {
    return vec1(u[0] * std::tanh(x[0]) + 0.1 * std::tanh(y[0]));
  };
  m.diffusion = [](const Vec&, const Vec&) { return identity1(); };
  m.g = [g_scale](const Vec& x) { return vec1(g_scale * std::tanh(x[0])); };
  m.drift_bound = 1.1;
  m.ellipticity = 0.25;
  m.g_bound = std::abs(g_scale);
  m.action_lo = vec1(-1.0);
  m.action_hi = vec1(1.0);
  f.pomdp = m;
  f.cost = quadratic_capped_cost(T, 0.1, 4.0);
  f.x0 = vec1(param(p, "x0", 1.0));
  f.state_box_lo = vec1(-2.25);
  f.state_box_hi = vec1(2.25);
  f.quantizer.lo = vec1(-2.0);
  f.quantizer.hi = vec1(2.0);
  f.quantizer.levels = 2;
  return f;
}

Fixture pomdp_informative(const json& p) {
  const double T = param(p, "T", 1.0);
  const double g_scale = param(p, "g_scale", 1.2);
  const double kappa = param(p, "kappa", 1.0);
  const double lambda = param(p, "lambda", 2.0);
  Fixture f;
  f.name = "pomdp_informative";
  info::PartiallyObservedModel m;
  m.state_dim = 2;  // (position, wind)
  m.obs_dim = 1;
  m.action_dim = 1;
  // A bistable wind commits to one of two wells and pushes the position;
  // the channel observes the wind, so the sign of Y_h reveals the drift
  // direction and the controller can counteract it.
  m.drift = [kappa, lambda](const Vec& x, const Vec&, const Vec& u) {
    return vec2(u[0] + kappa * std::tanh(2.0 * x[1]), lambda * std::tanh(2.0 * x[1]));
  };
  m.diffusion = [](const Vec&, const Vec&) {
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = 0.4;
    s(1, 1) = 1.0;
    return s;
  };
  m.g = [g_scale](const Vec& x) { return vec1(g_scale * std::tanh(2.0 * x[1])); };
  m.drift_bound = 3.0;
  m.ellipticity = 0.05;
  m.g_bound = std::abs(g_scale);
  m.action_lo = vec1(-1.0);
  m.action_hi = vec1(1.0);
  f.pomdp = m;
  cost::CostSpec c;
  c.horizon = T;
  c.running = [](const Vec&, const std::vector<Vec>&) { return 0.0; };
  c.terminal = [](const Vec& x) { return std::min(std::abs(x[0]), 1.5); };
  c.running_cap = 0.0;
  c.terminal_cap = 1.5;
  f.cost = c;
  f.x0 = vec2(0.0, 0.0);
  f.state_box_lo = vec2(-2.5, -2.5);
  f.state_box_hi = vec2(2.5, 2.5);
  f.quantizer.lo = vec1(-2.0);
  f.quantizer.hi = vec1(2.0);
  f.quantizer.levels = 2;
  return f;
}

Fixture team_local(const json& p) {
  const double T = param(p, "T", 1.0);
  const double g1 = param(p, "g1", 0.8);
  const double g2 = param(p, "g2", 0.6);
  Fixture f;
  f.name = "team_local";
  info::LocalMeasurementTeamModel m;
  m.agents = 2;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.drift = [](const Vec& x, const std::vector<Vec>& ys, const std::vector<Vec>& us) {
    return vec1(0.5 * (us[0][0] + us[1][0]) * std::tanh(x[0]) +
                0.05 * (std::tanh(ys[0][0]) + std::tanh(ys[1][0])));
  };
  m.diffusion = [](const Vec&, const std::vector<Vec>&) { return identity1(); };
  m.g.push_back([g1](const Vec& x) { return vec1(g1 * std::tanh(x[0])); });
  m.g.push_back([g2](const Vec& x) { return vec1(g2 * std::tanh(x[0])); });
  m.drift_bound = 1.2;
  m.ellipticity = 0.25;
  m.g_bound = {std::abs(g1), std::abs(g2)};
  m.action_lo = {vec1(-1.0), vec1(-1.0)};
  m.action_hi = {vec1(1.0), vec1(1.0)};
  f.team_local = m;
  f.cost = quadratic_capped_cost(T, 0.05, 4.0);
  f.x0 = vec1(param(p, "x0", 1.0));
  f.state_box_lo = vec1(-2.25);
  f.state_box_hi = vec1(2.25);
  f.quantizer.lo = vec1(-2.0);
  f.quantizer.hi = vec1(2.0);
  f.quantizer.levels = 2;
  return f;
}

cost::CostSpec team_pair_cost(double T, double action_weight, bool separable_only) {
  // State argument is the concatenated pair (x1, x2).
  cost::CostSpec c;
  c.horizon = T;
  c.running = [action_weight](const Vec& x, const std::vector<Vec>& us) {
    double penalty = 0.0;
    for (const Vec& u : us) penalty += action_weight * u.squaredNorm();
    return 0.5 * (capped_square(x[0], 4.0) + capped_square(x[1], 4.0)) + penalty;
  };
  c.terminal = [](const Vec& x) {
    return 0.5 * (capped_square(x[0], 4.0) + capped_square(x[1], 4.0));
  };
  c.running_cap = 4.0 + action_weight * 2.0;
  c.terminal_cap = 4.0;
  (void)separable_only;
  return c;
}

Fixture team_coupled(const json& p) {
  const double T = param(p, "T", 1.0);
  const double kappa = param(p, "kappa", 0.4);
  Fixture f;
  f.name = "team_coupled";
  info::CoupledLocalStateTeamModel m;
  m.agents = 2;
  m.local_dim = 1;
  for (int i = 0; i < 2; ++i) {
    m.local_drift.push_back(
        [](const Vec& x, const Vec& u) { return vec1(u[0] * std::tanh(x[0])); });
    m.diffusion.push_back([](const Vec&) { return identity1(); });
    m.action_lo.push_back(vec1(-1.0));
    m.action_hi.push_back(vec1(1.0));
  }
  // each agent is pulled by the other agent's state
  m.coupling.push_back([kappa](const std::vector<Vec>& xs, const std::vector<Vec>&) {
    return vec1(kappa * std::tanh(xs[1][0]));
  });
  m.coupling.push_back([kappa](const std::vector<Vec>& xs, const std::vector<Vec>&) {
    return vec1(kappa * std::tanh(xs[0][0]));
  });
  m.drift_bound = 1.0;
  m.coupling_bound = std::abs(kappa);
  m.ellipticity = 0.25;
  f.team_coupled = m;
  f.cost = team_pair_cost(T, 0.05, false);
  f.x0s = {vec1(1.0), vec1(-1.0)};
  f.state_box_lo = vec1(-2.25);
  f.state_box_hi = vec1(2.25);
  return f;
}

Fixture team_decoupled_separable(const json& p) {
  json q = p;
  q["kappa"] = 0.0;
  Fixture f = team_coupled(q);
  f.name = "team_decoupled_separable";
  return f;
}

}  // namespace

Fixture make_fixture(const std::string& name, const nlohmann::json& params) {
  if (name == "tanh_drift") return tanh_drift(params);
  if (name == "const_drift") return const_drift(params);
  if (name == "pomdp_bounded_g") return pomdp_bounded_g(params);
  if (name == "pomdp_informative") return pomdp_informative(params);
  if (name == "team_local") return team_local(params);
  if (name == "team_coupled") return team_coupled(params);
  if (name == "team_decoupled_separable") return team_decoupled_separable(params);
  throw std::invalid_argument("unknown fixture: " + name);
}

std::vector<std::string> fixture_names() {
  return {"tanh_drift",      "const_drift",  "pomdp_bounded_g",
          "pomdp_informative", "team_local", "team_coupled",
          "team_decoupled_separable"};
}

}  // namespace ctrldiff::fixtures
