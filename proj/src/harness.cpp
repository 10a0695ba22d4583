#include "ctrldiff/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctrldiff/cost.hpp"
#include "ctrldiff/dt_solver.hpp"
#include "ctrldiff/girsanov.hpp"
#include "ctrldiff/info.hpp"
#include "ctrldiff/rng.hpp"
#include "ctrldiff/sde.hpp"
#include "ctrldiff/version.hpp"

namespace ctrldiff::harness {

using nlohmann::json;

std::vector<std::string> experiment_kinds() {
  return {"validate",       "martingale",  "second_moment",        "l1_continuity",
          "estimator_equivalence", "dynkin", "h_sweep",            "pomdp_enum",
          "team_enum",      "independence_audit"};
}

// ---------------------------------------------------------------------------
// Config

json ExperimentConfig::to_json() const {
  return json{
      {"kind", kind},
      {"fixture", fixture},
      {"fixture_params", fixture_params},
      {"time", json{{"T", T}, {"macro_steps", macro_steps}, {"inner_refine", inner_refine}}},
      {"grids", json{{"state_cells", state_cells},
                     {"action_levels", action_levels},
                     {"obs_levels", obs_levels},
                     {"team_cells", team_cells}}},
      {"sampling", json{{"n_paths", n_paths},
                        {"n_kernel", n_kernel},
                        {"probe_count", probe_count},
                        {"challengers", challengers}}},
      {"seed", seed},
      {"workers", workers},
      {"tolerances", json{{"se_mult", se_mult},
                          {"dynkin_k", dynkin_k},
                          {"exact_eps", exact_eps},
                          {"kernel_row_eps", kernel_row_eps}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.kind = j.value("kind", c.kind);
  c.fixture = j.value("fixture", c.fixture);
  c.fixture_params = j.value("fixture_params", json::object());
  if (j.contains("time")) {
    const auto& t = j.at("time");
    c.T = t.value("T", c.T);
    c.macro_steps = t.value("macro_steps", c.macro_steps);
    c.inner_refine = t.value("inner_refine", c.inner_refine);
  }
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    c.state_cells = g.value("state_cells", c.state_cells);
    c.action_levels = g.value("action_levels", c.action_levels);
    c.obs_levels = g.value("obs_levels", c.obs_levels);
    c.team_cells = g.value("team_cells", c.team_cells);
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    c.n_paths = s.value("n_paths", c.n_paths);
    c.n_kernel = s.value("n_kernel", c.n_kernel);
    c.probe_count = s.value("probe_count", c.probe_count);
    c.challengers = s.value("challengers", c.challengers);
  }
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    c.se_mult = t.value("se_mult", c.se_mult);
    c.dynkin_k = t.value("dynkin_k", c.dynkin_k);
    c.exact_eps = t.value("exact_eps", c.exact_eps);
    c.kernel_row_eps = t.value("kernel_row_eps", c.kernel_row_eps);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Record

bool ResultRecord::pass() const {
  for (const auto& f : flags)
    if (!f.pass) return false;
  return true;
}

const ResultRecord::Estimate& ResultRecord::estimate(const std::string& name) const {
  for (const auto& e : estimates)
    if (e.name == name) return e;
  throw std::out_of_range("record has no estimate named " + name);
}

double ResultRecord::value(const std::string& name) const {
  for (const auto& v : values)
    if (v.name == name) return v.value;
  throw std::out_of_range("record has no value named " + name);
}

bool ResultRecord::flag(const std::string& name) const {
  for (const auto& f : flags)
    if (f.name == name) return f.pass;
  throw std::out_of_range("record has no flag named " + name);
}

json ResultRecord::to_json() const {
  json es = json::array();
  for (const auto& e : estimates)
    es.push_back(json{{"name", e.name}, {"mean", e.mean}, {"se", e.se}, {"n", e.n}});
  json vs = json::array();
  for (const auto& v : values) vs.push_back(json{{"name", v.name}, {"value", v.value}});
  json fs = json::array();
  for (const auto& f : flags) fs.push_back(json{{"name", f.name}, {"pass", f.pass}});
  return json{{"format", "ctrldiff-record"},
              {"version", version},
              {"kind", kind},
              {"config", config},
              {"estimates", es},
              {"values", vs},
              {"flags", fs},
              {"warnings", warnings},
              {"duration_seconds", duration_seconds}};
}

ResultRecord ResultRecord::from_json(const json& j) {
  if (j.value("format", "") != "ctrldiff-record")
    throw std::invalid_argument("not a ctrldiff record");
  ResultRecord r;
  r.version = j.at("version").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.config = j.at("config");
  for (const auto& e : j.at("estimates"))
    r.estimates.push_back(Estimate{e.at("name").get<std::string>(),
                                   e.at("mean").get<double>(), e.at("se").get<double>(),
                                   e.at("n").get<long>()});
  for (const auto& v : j.at("values"))
    r.values.push_back(Value{v.at("name").get<std::string>(), v.at("value").get<double>()});
  for (const auto& f : j.at("flags"))
    r.flags.push_back(Flag{f.at("name").get<std::string>(), f.at("pass").get<bool>()});
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.duration_seconds = j.at("duration_seconds").get<double>();
  return r;
}

std::string ResultRecord::to_csv() const {
  // Stable field order: row_type, kind, name, mean_or_value, se, n, pass
  std::ostringstream out;
  out.precision(17);
  for (const auto& e : estimates)
    out << "estimate," << kind << "," << e.name << "," << e.mean << "," << e.se << ","
        << e.n << ",\n";
  for (const auto& v : values)
    out << "value," << kind << "," << v.name << "," << v.value << ",,,\n";
  for (const auto& f : flags)
    out << "flag," << kind << "," << f.name << ",,,," << (f.pass ? "pass" : "fail") << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Canonical grids and policies

policy::ActionGrid default_action_grid(const fixtures::Fixture& f, int levels, int agent) {
  Vec lo, hi;
  if (f.diffusion) {
    lo = f.diffusion->action_lo;
    hi = f.diffusion->action_hi;
  } else if (f.pomdp) {
    lo = f.pomdp->action_lo;
    hi = f.pomdp->action_hi;
  } else if (f.team_local) {
    lo = f.team_local->action_lo.at(static_cast<std::size_t>(agent));
    hi = f.team_local->action_hi.at(static_cast<std::size_t>(agent));
  } else if (f.team_coupled) {
    lo = f.team_coupled->action_lo.at(static_cast<std::size_t>(agent));
    hi = f.team_coupled->action_hi.at(static_cast<std::size_t>(agent));
  } else {
    throw std::invalid_argument("fixture has no model");
  }
  return policy::quantize_actions(lo, hi, std::vector<int>(static_cast<std::size_t>(lo.size()), levels));
}

namespace {

policy::StateCells fixture_cells(const fixtures::Fixture& f, int cells) {
  policy::StateCells c;
  c.lo = f.state_box_lo;
  c.hi = f.state_box_hi;
  c.per_dim.assign(static_cast<std::size_t>(f.state_box_lo.size()), cells);
  return c;
}

policy::ObservationQuantizer fixture_quantizer(const fixtures::Fixture& f, int levels) {
  policy::ObservationQuantizer q = f.quantizer;
  q.levels = levels;
  return q;
}

std::shared_ptr<policy::DiscretePolicy> uniform_open_loop(const policy::ActionGrid& grid,
                                                          int steps) {
  const auto n = static_cast<std::size_t>(grid.size());
  policy::WeightRow row(n, 1.0 / static_cast<double>(n));
  return std::make_shared<policy::OpenLoopPolicy>(
      grid, std::vector<policy::WeightRow>(static_cast<std::size_t>(steps), row));
}

std::shared_ptr<policy::DiscretePolicy> markov_threshold(const policy::ActionGrid& grid,
                                                         const policy::StateCells& cells,
                                                         int steps) {
  // hold the lowest action outside |x| <= 0.5, the middle action inside
  const long a_low = 0;
  const long a_mid = (grid.size() - 1) / 2;
  std::vector<std::vector<policy::WeightRow>> rows(
      static_cast<std::size_t>(steps),
      std::vector<policy::WeightRow>(static_cast<std::size_t>(cells.cell_count()),
                                     policy::WeightRow(static_cast<std::size_t>(grid.size()), 0.0)));
  for (int k = 0; k < steps; ++k)
    for (long c = 0; c < cells.cell_count(); ++c) {
      const double center = cells.center(c)[0];
      const long a = std::abs(center) > 0.5 ? a_low : a_mid;
      rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]
          [static_cast<std::size_t>(a)] = 1.0;
    }
  return std::make_shared<policy::MarkovTablePolicy>(grid, cells, std::move(rows));
}

std::shared_ptr<policy::DiscretePolicy> wide_sense_threshold(
    const policy::ActionGrid& grid, const policy::ObservationQuantizer& quantizer,
    int steps) {
  // keyed by the latest sample only: low half of the code space -> highest
  // action, upper half -> lowest action (steer against the observed side)
  const long cps = quantizer.codes_per_sample();
  std::vector<std::map<long, policy::WeightRow>> rows(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k)
    for (long code = 0; code < cps; ++code) {
      policy::WeightRow row(static_cast<std::size_t>(grid.size()), 0.0);
      const long a = code < cps / 2 || cps == 1 ? grid.size() - 1 : 0;
      row[static_cast<std::size_t>(a)] = 1.0;
      rows[static_cast<std::size_t>(k)].emplace(code, std::move(row));
    }
  return std::make_shared<policy::WideSensePolicy>(grid, quantizer, 1, std::move(rows));
}

}  // namespace

std::vector<policy::InterpolatedPolicy> canonical_single_policies(
    const fixtures::Fixture& f, const ExperimentConfig& cfg) {
  const TimeGrid grid = cfg.time_grid();
  const auto agrid = default_action_grid(f, cfg.action_levels);
  std::vector<policy::InterpolatedPolicy> out;
  out.push_back(policy::interpolate(
      std::make_shared<policy::OpenLoopPolicy>(
          policy::OpenLoopPolicy::constant(agrid, grid.macro_steps, 0)),
      grid));
  if (f.pomdp) {
    out.push_back(policy::interpolate(
        wide_sense_threshold(agrid, fixture_quantizer(f, cfg.obs_levels), grid.macro_steps),
        grid));
  } else {
    out.push_back(policy::interpolate(
        markov_threshold(agrid, fixture_cells(f, cfg.state_cells), grid.macro_steps), grid));
  }
  out.push_back(policy::interpolate(uniform_open_loop(agrid, grid.macro_steps), grid));
  return out;
}

std::vector<policy::TeamPolicyTuple> canonical_team_policies(const fixtures::Fixture& f,
                                                             const ExperimentConfig& cfg) {
  const TimeGrid grid = cfg.time_grid();
  const int agents = f.team_local ? f.team_local->agents : f.team_coupled->agents;
  std::vector<policy::TeamPolicyTuple> out(3);
  for (int i = 0; i < agents; ++i) {
    const auto agrid = default_action_grid(f, cfg.action_levels, i);
    out[0].members.push_back(std::make_shared<policy::OpenLoopPolicy>(
        policy::OpenLoopPolicy::constant(agrid, grid.macro_steps, 0)));
    if (f.team_local) {
      out[1].members.push_back(wide_sense_threshold(
          agrid, fixture_quantizer(f, cfg.obs_levels), grid.macro_steps));
    } else {
      out[1].members.push_back(
          markov_threshold(agrid, fixture_cells(f, cfg.team_cells), grid.macro_steps));
    }
    out[2].members.push_back(uniform_open_loop(agrid, grid.macro_steps));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment bodies

namespace {

void add_estimate(ResultRecord& r, const std::string& name, const EstimateWithError& e) {
  r.estimates.push_back(ResultRecord::Estimate{name, e.mean, e.standard_error, e.n});
}

void add_value(ResultRecord& r, const std::string& name, double v) {
  r.values.push_back(ResultRecord::Value{name, v});
}

void add_flag(ResultRecord& r, const std::string& name, bool pass) {
  r.flags.push_back(ResultRecord::Flag{name, pass});
}

cost::CostSpec unit_terminal_cost(double T) {
  cost::CostSpec c;
  c.horizon = T;
  c.running = [](const Vec&, const std::vector<Vec>&) { return 0.0; };
  c.terminal = [](const Vec&) { return 1.0; };
  c.running_cap = 0.0;
  c.terminal_cap = 1.0;
  return c;
}

void run_validate(const ExperimentConfig& cfg, const fixtures::Fixture& f, ResultRecord& r) {
  double max_drift = 0.0, max_sigma = 0.0, min_eig = 0.0;
  bool invertible = true;
  if (f.diffusion) {
    const auto rep = validate_assumptions(*f.diffusion, cfg.probe_count, f.state_box_lo,
                                          f.state_box_hi, cfg.seed);
    max_drift = rep.max_drift_norm;
    max_sigma = rep.max_diffusion_norm;
    min_eig = rep.min_eigenvalue;
    invertible = rep.invertible;
    add_flag(r, "bounds", rep.bounds_pass);
    add_flag(r, "ellipticity", rep.ellipticity_pass);
  } else if (f.pomdp) {
    // bounds must hold uniformly over probed y
    const auto& m = *f.pomdp;
    double max_g = 0.0;
    min_eig = std::numeric_limits<double>::infinity();
    for (long p = 0; p < cfg.probe_count; ++p) {
      Vec x(m.state_dim), y(m.obs_dim), u(m.action_dim);
      for (int d = 0; d < m.state_dim; ++d)
        x[d] = f.state_box_lo[d] + rng::uniform01(cfg.seed, rng::Stream::probe, p, 0, d) *
                                       (f.state_box_hi[d] - f.state_box_lo[d]);
      for (int d = 0; d < m.obs_dim; ++d)
        y[d] = -4.0 + 8.0 * rng::uniform01(cfg.seed, rng::Stream::probe, p, 1, d);
      for (int d = 0; d < m.action_dim; ++d)
        u[d] = m.action_lo[d] + rng::uniform01(cfg.seed, rng::Stream::probe, p, 2, d) *
                                    (m.action_hi[d] - m.action_lo[d]);
      const Mat sigma = m.diffusion(x, y);
      max_drift = std::max(max_drift, m.drift(x, y, u).norm());
      max_sigma = std::max(max_sigma, sigma.norm());
      max_g = std::max(max_g, m.g(x).norm());
      Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * sigma * sigma.transpose());
      min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
    }
    invertible = min_eig > 0.0;
    add_value(r, "max_g", max_g);
    add_flag(r, "bounds", max_drift <= m.drift_bound && max_sigma <= m.drift_bound &&
                              max_g <= m.g_bound);
    add_flag(r, "ellipticity", min_eig >= m.ellipticity);
  } else if (f.team_local) {
    const auto& m = *f.team_local;
    double max_g = 0.0;
    min_eig = std::numeric_limits<double>::infinity();
    for (long p = 0; p < cfg.probe_count; ++p) {
      Vec x(m.state_dim);
      for (int d = 0; d < m.state_dim; ++d)
        x[d] = f.state_box_lo[d] + rng::uniform01(cfg.seed, rng::Stream::probe, p, 0, d) *
                                       (f.state_box_hi[d] - f.state_box_lo[d]);
      std::vector<Vec> ys, us;
      for (int i = 0; i < m.agents; ++i) {
        Vec y(m.obs_dim), u(m.action_lo[static_cast<std::size_t>(i)].size());
        for (int d = 0; d < m.obs_dim; ++d)
          y[d] = -4.0 + 8.0 * rng::uniform01(cfg.seed, rng::Stream::probe, p, 10 + i, d);
        for (long d = 0; d < u.size(); ++d)
          u[d] = m.action_lo[static_cast<std::size_t>(i)][d] +
                 rng::uniform01(cfg.seed, rng::Stream::probe, p, 20 + i, d) *
                     (m.action_hi[static_cast<std::size_t>(i)][d] -
                      m.action_lo[static_cast<std::size_t>(i)][d]);
        ys.push_back(y);
        us.push_back(u);
        max_g = std::max(max_g, m.g[static_cast<std::size_t>(i)](x).norm() /
                                    std::max(m.g_bound[static_cast<std::size_t>(i)], 1e-300));
      }
      const Mat sigma = m.diffusion(x, ys);
      max_drift = std::max(max_drift, m.drift(x, ys, us).norm());
      max_sigma = std::max(max_sigma, sigma.norm());
      Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * sigma * sigma.transpose());
      min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
    }
    invertible = min_eig > 0.0;
    add_value(r, "max_g_ratio", max_g);
    add_flag(r, "bounds",
             max_drift <= m.drift_bound && max_sigma <= m.drift_bound && max_g <= 1.0);
    add_flag(r, "ellipticity", min_eig >= m.ellipticity);
  } else if (f.team_coupled) {
    const auto& m = *f.team_coupled;
    double max_coupling = 0.0;
    min_eig = std::numeric_limits<double>::infinity();
    for (long p = 0; p < cfg.probe_count; ++p) {
      std::vector<Vec> xs, us;
      for (int i = 0; i < m.agents; ++i) {
        Vec x(m.local_dim), u(m.action_lo[static_cast<std::size_t>(i)].size());
        for (int d = 0; d < m.local_dim; ++d)
          x[d] = f.state_box_lo[d] + rng::uniform01(cfg.seed, rng::Stream::probe, p, 30 + i, d) *
                                         (f.state_box_hi[d] - f.state_box_lo[d]);
        for (long d = 0; d < u.size(); ++d)
          u[d] = m.action_lo[static_cast<std::size_t>(i)][d] +
                 rng::uniform01(cfg.seed, rng::Stream::probe, p, 40 + i, d) *
                     (m.action_hi[static_cast<std::size_t>(i)][d] -
                      m.action_lo[static_cast<std::size_t>(i)][d]);
        xs.push_back(x);
        us.push_back(u);
      }
      for (int i = 0; i < m.agents; ++i) {
        const Mat sigma = m.diffusion[static_cast<std::size_t>(i)](xs[static_cast<std::size_t>(i)]);
        max_drift = std::max(max_drift, m.local_drift[static_cast<std::size_t>(i)](
                                            xs[static_cast<std::size_t>(i)],
                                            us[static_cast<std::size_t>(i)])
                                            .norm());
        max_sigma = std::max(max_sigma, sigma.norm());
        max_coupling =
            std::max(max_coupling, m.coupling[static_cast<std::size_t>(i)](xs, us).norm());
        Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * sigma * sigma.transpose());
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
      }
    }
    invertible = min_eig > 0.0;
    add_value(r, "max_coupling", max_coupling);
    add_flag(r, "bounds", max_drift <= m.drift_bound && max_sigma <= m.drift_bound &&
                              max_coupling <= m.coupling_bound);
    add_flag(r, "ellipticity", min_eig >= m.ellipticity);
  }
  add_value(r, "max_drift", max_drift);
  add_value(r, "max_sigma", max_sigma);
  add_value(r, "min_eigenvalue", min_eig);
  add_flag(r, "invertible", invertible);
}

void run_martingale(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                    ResultRecord& r) {
  const TimeGrid grid = cfg.time_grid();
  const auto unit = unit_terminal_cost(cfg.T);
  EstimateWithError mean_weight;
  // E[weight * 1] through the corresponding reweighted estimator
  if (f.diffusion) {
    const auto pi = policy::interpolate(
        uniform_open_loop(default_action_grid(f, cfg.action_levels), grid.macro_steps), grid);
    mean_weight = cost::mc_cost_reweighted(*f.diffusion, pi, unit, grid, cfg.mc(), f.x0);
  } else if (f.pomdp) {
    const auto pi = policy::interpolate(
        uniform_open_loop(default_action_grid(f, cfg.action_levels), grid.macro_steps), grid);
    mean_weight = cost::mc_cost_pomdp(*f.pomdp, pi, unit, grid, cfg.mc(), f.x0);
  } else if (f.team_local) {
    policy::TeamPolicyTuple tuple;
    for (int i = 0; i < f.team_local->agents; ++i)
      tuple.members.push_back(
          uniform_open_loop(default_action_grid(f, cfg.action_levels, i), grid.macro_steps));
    mean_weight = cost::mc_cost_team_local_meas(*f.team_local, tuple, unit, grid, cfg.mc(), f.x0);
  } else if (f.team_coupled) {
    policy::TeamPolicyTuple tuple;
    for (int i = 0; i < f.team_coupled->agents; ++i)
      tuple.members.push_back(
          uniform_open_loop(default_action_grid(f, cfg.action_levels, i), grid.macro_steps));
    mean_weight = cost::mc_cost_team_coupled(*f.team_coupled, tuple, unit, grid, cfg.mc(), f.x0s);
  }
  add_estimate(r, "mean_weight", mean_weight);
  add_flag(r, "martingale",
           std::abs(mean_weight.mean - 1.0) <= cfg.se_mult * mean_weight.standard_error);
}

void run_second_moment(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                       ResultRecord& r) {
  if (!f.diffusion)
    throw std::invalid_argument("second_moment: needs a fully observed fixture");
  const TimeGrid grid = cfg.time_grid();
  const auto pi = policy::interpolate(
      uniform_open_loop(default_action_grid(f, cfg.action_levels), grid.macro_steps), grid);
  const auto rep = girsanov::second_moment_bound_check(
      *f.diffusion, pi, grid, cfg.mc(), f.x0, f.state_box_lo, f.state_box_hi, cfg.probe_count);
  add_estimate(r, "z_squared", rep.z_squared);
  add_value(r, "m_bound", rep.m_bound);
  add_value(r, "cap", rep.cap);
  add_flag(r, "within_cap", !rep.violation);
  if (cfg.fixture == "const_drift") {
    // constant drift, unit diffusion: E[Z^2] = e^{mu^2 T} exactly
    add_flag(r, "matches_exact_cap",
             std::abs(rep.z_squared.mean - rep.cap) <=
                 cfg.se_mult * rep.z_squared.standard_error);
  }
}

void run_l1_continuity(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                       ResultRecord& r) {
  if (!f.diffusion) throw std::invalid_argument("l1_continuity: needs a fully observed fixture");
  const TimeGrid grid = cfg.time_grid();
  const auto agrid = default_action_grid(f, cfg.action_levels);
  const auto base = markov_threshold(agrid, fixture_cells(f, cfg.state_cells), grid.macro_steps);
  const auto pi0 = policy::interpolate(base, grid);

  const std::vector<double> schedule = {0.2, 0.1, 0.05};
  std::vector<EstimateWithError> dists;
  for (double eps : schedule) {
    const auto mixed = policy::perturb_policy(*base, eps);
    const auto d = girsanov::weight_l1_distance(policy::interpolate(mixed, grid), pi0,
                                                *f.diffusion, grid, cfg.mc(), f.x0);
    dists.push_back(d);
    std::ostringstream name;
    name << "l1_eps_" << eps;
    add_estimate(r, name.str(), d);
  }
  const auto zero = girsanov::weight_l1_distance(pi0, pi0, *f.diffusion, grid, cfg.mc(), f.x0);
  add_estimate(r, "l1_eps_0", zero);

  add_flag(r, "zero_exact", zero.mean == 0.0 && zero.standard_error == 0.0);
  bool positive = true, monotone = true;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    positive = positive && dists[i].mean > 0.0;
    if (i + 1 < dists.size())
      monotone = monotone && dists[i + 1].mean <=
                                 dists[i].mean + cfg.se_mult * combined_se(dists[i], dists[i + 1]);
  }
  add_flag(r, "positive", positive);
  add_flag(r, "non_increasing", monotone);
}

void run_estimator_equivalence(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                               ResultRecord& r) {
  const TimeGrid grid = cfg.time_grid();
  if (f.diffusion || f.pomdp) {
    const auto trio = canonical_single_policies(f, cfg);
    for (std::size_t i = 0; i < trio.size(); ++i) {
      EstimateWithError direct, reweighted;
      if (f.diffusion) {
        direct = cost::mc_cost_direct(*f.diffusion, trio[i], f.cost, grid, cfg.mc(), f.x0);
        reweighted =
            cost::mc_cost_reweighted(*f.diffusion, trio[i], f.cost, grid, cfg.mc(), f.x0);
      } else {
        direct = cost::mc_cost_pomdp_direct(*f.pomdp, trio[i], f.cost, grid, cfg.mc(), f.x0);
        reweighted = cost::mc_cost_pomdp(*f.pomdp, trio[i], f.cost, grid, cfg.mc(), f.x0);
      }
      add_estimate(r, "direct_" + std::to_string(i), direct);
      add_estimate(r, "reweighted_" + std::to_string(i), reweighted);
      add_flag(r, "equivalent_" + std::to_string(i),
               std::abs(direct.mean - reweighted.mean) <=
                   cfg.se_mult * combined_se(direct, reweighted));
    }
  } else {
    const auto trios = canonical_team_policies(f, cfg);
    for (std::size_t i = 0; i < trios.size(); ++i) {
      EstimateWithError direct, reweighted;
      if (f.team_local) {
        direct = cost::mc_cost_team_local_meas_direct(*f.team_local, trios[i], f.cost, grid,
                                                      cfg.mc(), f.x0);
        reweighted =
            cost::mc_cost_team_local_meas(*f.team_local, trios[i], f.cost, grid, cfg.mc(), f.x0);
      } else {
        direct = cost::mc_cost_team_coupled_direct(*f.team_coupled, trios[i], f.cost, grid,
                                                   cfg.mc(), f.x0s);
        reweighted =
            cost::mc_cost_team_coupled(*f.team_coupled, trios[i], f.cost, grid, cfg.mc(), f.x0s);
      }
      add_estimate(r, "direct_" + std::to_string(i), direct);
      add_estimate(r, "reweighted_" + std::to_string(i), reweighted);
      add_flag(r, "equivalent_" + std::to_string(i),
               std::abs(direct.mean - reweighted.mean) <=
                   cfg.se_mult * combined_se(direct, reweighted));
    }
  }
}

void run_dynkin(const ExperimentConfig& cfg, const fixtures::Fixture& f, ResultRecord& r) {
  if (!f.diffusion) throw std::invalid_argument("dynkin: needs a fully observed fixture");
  const auto agrid = default_action_grid(f, cfg.action_levels);
  std::vector<sde::TestFunction> tfs = {
      sde::polynomial_bump(6.0, vec1(1.0), 0.0),
      sde::polynomial_bump(6.0, vec1(0.5), 1.0),
      sde::polynomial_bump(6.0, vec1(0.0), 1.0),
  };
  for (std::size_t fi = 0; fi < tfs.size(); ++fi) {
    std::vector<EstimateWithError> res;
    std::vector<double> deltas;
    for (int level = 0; level < 3; ++level) {
      const TimeGrid grid(cfg.T, cfg.macro_steps, cfg.inner_refine << level);
      const auto pi = policy::interpolate(
          markov_threshold(agrid, fixture_cells(f, cfg.state_cells), grid.macro_steps), grid);
      const auto e = sde::dynkin_residual(*f.diffusion, pi, tfs[fi], grid, cfg.mc(), f.x0);
      res.push_back(e);
      deltas.push_back(grid.delta());
      std::ostringstream name;
      name << "residual_f" << fi << "_m" << (cfg.inner_refine << level);
      add_estimate(r, name.str(), e);
      add_flag(r, "small_f" + std::to_string(fi) + "_m" + std::to_string(cfg.inner_refine << level),
               std::abs(e.mean) <=
                   cfg.se_mult * e.standard_error + cfg.dynkin_k * grid.delta());
    }
    bool improves = true;
    for (int level = 0; level + 1 < 3; ++level)
      improves = improves &&
                 std::abs(res[static_cast<std::size_t>(level + 1)].mean) <=
                     std::abs(res[static_cast<std::size_t>(level)].mean) +
                         cfg.se_mult * combined_se(res[static_cast<std::size_t>(level)],
                                                   res[static_cast<std::size_t>(level + 1)]);
    add_flag(r, "refines_f" + std::to_string(fi), improves);
  }
}

void run_h_sweep(const ExperimentConfig& cfg, const fixtures::Fixture& f, ResultRecord& r) {
  if (!f.diffusion) throw std::invalid_argument("h_sweep: needs a fully observed fixture");
  const auto agrid = default_action_grid(f, cfg.action_levels);
  const auto cells = fixture_cells(f, cfg.state_cells);

  // h in {T/2, T/4, T/8, T/16} at fixed delta = T/256
  const std::vector<int> macro = {2, 4, 8, 16};
  const int delta_inverse = 256;
  std::vector<double> jstar;
  std::vector<EstimateWithError> lifted;
  for (int n_h : macro) {
    const TimeGrid grid(cfg.T, n_h, delta_inverse / n_h);
    const auto solved = dt::solve_and_lift(*f.diffusion, f.cost, cells, agrid, grid,
                                           cfg.n_kernel, rng::derive(cfg.seed, n_h), f.x0,
                                           cfg.workers);
    const auto eval =
        cost::mc_cost_direct(*f.diffusion, solved.lifted, f.cost, grid, cfg.mc(), f.x0);
    jstar.push_back(solved.optimal_value);
    lifted.push_back(eval);
    add_value(r, "h_" + std::to_string(n_h), grid.h());
    add_value(r, "jstar_" + std::to_string(n_h), solved.optimal_value);
    add_estimate(r, "lifted_" + std::to_string(n_h), eval);
  }

  bool gaps_ok = true;
  for (std::size_t i = 0; i + 2 < macro.size(); ++i) {
    const double gap0 = std::abs(jstar[i] - jstar[i + 1]);
    const double gap1 = std::abs(jstar[i + 1] - jstar[i + 2]);
    const double tol = cfg.se_mult * std::sqrt(lifted[i].standard_error * lifted[i].standard_error +
                                               2.0 * lifted[i + 1].standard_error *
                                                   lifted[i + 1].standard_error +
                                               lifted[i + 2].standard_error *
                                                   lifted[i + 2].standard_error);
    gaps_ok = gaps_ok && gap1 <= gap0 + tol;
  }
  add_flag(r, "gaps_non_increasing", gaps_ok);

  bool finest_best = true;
  for (std::size_t i = 0; i + 1 < macro.size(); ++i)
    finest_best = finest_best &&
                  lifted.back().mean <=
                      lifted[i].mean + cfg.se_mult * combined_se(lifted.back(), lifted[i]);
  add_flag(r, "finest_policy_best", finest_best);
}

void run_pomdp_enum(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                    ResultRecord& r) {
  if (!f.pomdp) throw std::invalid_argument("pomdp_enum: needs a POMDP fixture");
  const TimeGrid grid = cfg.time_grid();
  const auto agrid = default_action_grid(f, cfg.action_levels);
  const auto quant = fixture_quantizer(f, cfg.obs_levels);

  const auto ws = dt::enumerate_wide_sense(*f.pomdp, f.cost, grid, quant, agrid, cfg.mc(), f.x0);
  const auto ol = dt::enumerate_open_loop(*f.pomdp, f.cost, grid, agrid, cfg.mc(), f.x0);
  add_estimate(r, "best_wide_sense", ws.value);
  add_estimate(r, "best_open_loop", ol.value);
  add_value(r, "wide_sense_candidates", static_cast<double>(ws.candidates));
  add_value(r, "open_loop_candidates", static_cast<double>(ol.candidates));

  const double margin = ol.value.mean - ws.value.mean;
  const double band = cfg.se_mult * combined_se(ws.value, ol.value);
  add_value(r, "information_margin", margin);
  if (f.pomdp->g_bound > 0.0) {
    add_flag(r, "information_helps", margin >= band);
  } else {
    add_flag(r, "uninformative_ties", std::abs(margin) <= band);
  }
}

void run_team_enum(const ExperimentConfig& cfg, const fixtures::Fixture& f, ResultRecord& r) {
  const TimeGrid grid = cfg.time_grid();
  std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>> classes;
  std::function<EstimateWithError(const policy::TeamPolicyTuple&)> evaluate;

  if (f.team_coupled) {
    const auto& m = *f.team_coupled;
    for (int i = 0; i < m.agents; ++i)
      classes.push_back(dt::enumerate_markov_tables(default_action_grid(f, cfg.action_levels, i),
                                                    fixture_cells(f, cfg.team_cells),
                                                    grid.macro_steps, /*stationary=*/true));
    evaluate = [&, grid](const policy::TeamPolicyTuple& tuple) {
      return cost::mc_cost_team_coupled(m, tuple, f.cost, grid, cfg.mc(), f.x0s);
    };
  } else if (f.team_local) {
    const auto& m = *f.team_local;
    for (int i = 0; i < m.agents; ++i)
      classes.push_back(dt::enumerate_wide_sense_tables(
          default_action_grid(f, cfg.action_levels, i), fixture_quantizer(f, cfg.obs_levels),
          grid.macro_steps, /*history_len=*/1));
    evaluate = [&, grid](const policy::TeamPolicyTuple& tuple) {
      return cost::mc_cost_team_local_meas(m, tuple, f.cost, grid, cfg.mc(), f.x0);
    };
  } else {
    throw std::invalid_argument("team_enum: needs a team fixture");
  }

  const auto best = dt::team_brute_force(classes, evaluate);
  add_estimate(r, "team_optimum", best.value);
  add_value(r, "tuples_evaluated", static_cast<double>(best.evaluated));

  // random challenger tuples, common noise
  bool never_beaten = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.challengers; ++c) {
    policy::TeamPolicyTuple tuple;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const auto pick = static_cast<std::size_t>(
          rng::uniform01(rng::derive(cfg.seed, 0xCA11), rng::Stream::scenario, c, i, 0) *
          static_cast<double>(classes[i].size()));
      tuple.members.push_back(classes[i][std::min(pick, classes[i].size() - 1)]);
    }
    const auto v = evaluate(tuple);
    never_beaten = never_beaten && best.value.mean <= v.mean;
    worst_margin = std::min(worst_margin, v.mean - best.value.mean);
  }
  add_value(r, "challenger_min_margin", worst_margin);
  add_flag(r, "optimum_unbeaten", never_beaten);

  if (f.team_coupled && cfg.fixture == "team_decoupled_separable") {
    // solo problems: each agent alone, half of the separable pair cost
    const auto& m = *f.team_coupled;
    EstimateWithError solos[2];
    for (int i = 0; i < 2; ++i) {
      info::CoupledLocalStateTeamModel solo;
      solo.agents = 1;
      solo.local_dim = m.local_dim;
      solo.local_drift = {m.local_drift[static_cast<std::size_t>(i)]};
      solo.coupling = {[](const std::vector<Vec>&, const std::vector<Vec>&) {
        return Vec::Zero(1);
      }};
      solo.diffusion = {m.diffusion[static_cast<std::size_t>(i)]};
      solo.drift_bound = m.drift_bound;
      solo.coupling_bound = 0.0;
      solo.ellipticity = m.ellipticity;
      solo.action_lo = {m.action_lo[static_cast<std::size_t>(i)]};
      solo.action_hi = {m.action_hi[static_cast<std::size_t>(i)]};
      cost::CostSpec half;
      half.horizon = f.cost.horizon;
      half.running = [](const Vec& x, const std::vector<Vec>& us) {
        return 0.5 * std::min(x[0] * x[0], 4.0) + 0.05 * us[0].squaredNorm();
      };
      half.terminal = [](const Vec& x) { return 0.5 * std::min(x[0] * x[0], 4.0); };
      half.running_cap = f.cost.running_cap;
      half.terminal_cap = f.cost.terminal_cap;
      std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>> solo_class = {
          classes[static_cast<std::size_t>(i)]};
      const std::vector<Vec> solo_x0 = {f.x0s[static_cast<std::size_t>(i)]};
      const auto solo_best = dt::team_brute_force(
          solo_class,
          [&, grid](const policy::TeamPolicyTuple& tuple) {
            return cost::mc_cost_team_coupled(solo, tuple, half, grid, cfg.mc(), solo_x0);
          });
      solos[i] = solo_best.value;
      add_estimate(r, "solo_optimum_" + std::to_string(i), solo_best.value);
    }
    const double sum = solos[0].mean + solos[1].mean;
    const double tol =
        cfg.se_mult * std::sqrt(best.value.standard_error * best.value.standard_error +
                                solos[0].standard_error * solos[0].standard_error +
                                solos[1].standard_error * solos[1].standard_error);
    add_value(r, "solo_sum", sum);
    add_flag(r, "separable_matches_solo_sum", std::abs(best.value.mean - sum) <= tol);
  }
}

void run_independence_audit(const ExperimentConfig& cfg, const fixtures::Fixture& f,
                            ResultRecord& r) {
  const TimeGrid grid = cfg.time_grid();
  const long n = cfg.n_paths;
  const int workers = cfg.workers;

  auto macro_sums = [&](const sde::NoisePlan& plan) {
    std::vector<std::vector<double>> by_macro(static_cast<std::size_t>(grid.macro_steps));
    for (int k = 0; k < grid.macro_steps; ++k) {
      std::vector<double> sums(static_cast<std::size_t>(plan.channels), 0.0);
      for (int m = 0; m < grid.inner_refine; ++m) {
        const long j = static_cast<long>(k) * grid.inner_refine + m;
        for (int c = 0; c < plan.channels; ++c)
          sums[static_cast<std::size_t>(c)] += plan.inc(j, c);
      }
      by_macro[static_cast<std::size_t>(k)] = std::move(sums);
    }
    return by_macro;
  };
  auto append_channels = [](std::vector<std::vector<double>>& dst,
                            const std::vector<std::vector<double>>& src) {
    if (dst.empty()) {
      dst = src;
      return;
    }
    for (std::size_t k = 0; k < dst.size(); ++k)
      dst[k].insert(dst[k].end(), src[k].begin(), src[k].end());
  };

  long total_flags = 0;
  if (f.diffusion) {
    const auto pi = canonical_single_policies(f, cfg)[1];
    info::AuditBatch batch;
    batch.actions.resize(static_cast<std::size_t>(n));
    batch.increments.resize(static_cast<std::size_t>(n));
    parallel_paths(n, workers, [&](long p) {
      const auto plan = sde::sample_brownian(grid, f.diffusion->state_dim, cfg.seed, p);
      const auto path = sde::simulate_path(*f.diffusion, pi, grid, plan, f.x0);
      batch.actions[static_cast<std::size_t>(p)] = path.action_index;
      batch.increments[static_cast<std::size_t>(p)] = macro_sums(plan);
    });
    const auto rep = info::independence_audit(batch);
    total_flags += static_cast<long>(rep.flags.size());
    add_value(r, "pairs_checked", static_cast<double>(rep.pairs_checked));
  } else if (f.pomdp) {
    const auto pi = canonical_single_policies(f, cfg)[1];
    info::AuditBatch batch;
    batch.actions.resize(static_cast<std::size_t>(n));
    batch.increments.resize(static_cast<std::size_t>(n));
    parallel_paths(n, workers, [&](long p) {
      const auto w_plan = sde::sample_brownian(grid, f.pomdp->state_dim, cfg.seed, p, 0);
      const auto b_plan = sde::sample_brownian(grid, f.pomdp->obs_dim, cfg.seed, p, 1);
      const auto rec = info::simulate_pomdp_reference(*f.pomdp, pi, grid, w_plan, b_plan, f.x0);
      batch.actions[static_cast<std::size_t>(p)] = rec.action_index;
      auto incs = macro_sums(w_plan);
      append_channels(incs, macro_sums(b_plan));
      batch.increments[static_cast<std::size_t>(p)] = std::move(incs);
    });
    const auto rep = info::independence_audit(batch);
    total_flags += static_cast<long>(rep.flags.size());
    add_value(r, "pairs_checked", static_cast<double>(rep.pairs_checked));

    // Deliberately anticipative probe: the step-k action thresholds the
    // (k+1)-th observation sample, which must raise at least one flag.
    info::AuditBatch peek;
    peek.actions.resize(static_cast<std::size_t>(n));
    peek.increments.resize(static_cast<std::size_t>(n));
    parallel_paths(n, workers, [&](long p) {
      const auto b_plan = sde::sample_brownian(grid, f.pomdp->obs_dim, cfg.seed, p, 1);
      const auto w_plan = sde::sample_brownian(grid, f.pomdp->state_dim, cfg.seed, p, 0);
      std::vector<double> y_at(static_cast<std::size_t>(grid.macro_steps) + 1, 0.0);
      for (int k = 0; k < grid.macro_steps; ++k) {
        double sum = 0.0;
        for (int m = 0; m < grid.inner_refine; ++m)
          sum += b_plan.inc(static_cast<long>(k) * grid.inner_refine + m, 0);
        y_at[static_cast<std::size_t>(k) + 1] = y_at[static_cast<std::size_t>(k)] + sum;
      }
      std::vector<int> actions(static_cast<std::size_t>(grid.macro_steps));
      for (int k = 0; k < grid.macro_steps; ++k) {
        const int peek_idx = std::min(k + 1, grid.macro_steps);
        actions[static_cast<std::size_t>(k)] =
            y_at[static_cast<std::size_t>(peek_idx)] >= 0.0 ? 1 : 0;
      }
      peek.actions[static_cast<std::size_t>(p)] = std::move(actions);
      auto incs = macro_sums(w_plan);
      append_channels(incs, macro_sums(b_plan));
      peek.increments[static_cast<std::size_t>(p)] = std::move(incs);
    });
    const auto peek_rep = info::independence_audit(peek);
    add_value(r, "anticipative_flags", static_cast<double>(peek_rep.flags.size()));
    add_flag(r, "anticipative_detected", !peek_rep.flags.empty());
  } else if (f.team_local) {
    const auto tuple = canonical_team_policies(f, cfg)[1];
    const int agents = f.team_local->agents;
    std::vector<info::AuditBatch> batches(static_cast<std::size_t>(agents));
    for (auto& b : batches) {
      b.actions.resize(static_cast<std::size_t>(n));
      b.increments.resize(static_cast<std::size_t>(n));
    }
    parallel_paths(n, workers, [&](long p) {
      const auto w_plan = sde::sample_brownian(grid, f.team_local->state_dim, cfg.seed, p, 0);
      std::vector<sde::NoisePlan> b_plans;
      for (int i = 0; i < agents; ++i)
        b_plans.push_back(sde::sample_brownian(grid, f.team_local->obs_dim, cfg.seed, p,
                                               static_cast<std::uint64_t>(1 + i)));
      const auto rec = info::simulate_team_local_meas_reference(*f.team_local, tuple, grid,
                                                                w_plan, b_plans, f.x0);
      auto incs = macro_sums(w_plan);
      for (int i = 0; i < agents; ++i)
        append_channels(incs, macro_sums(b_plans[static_cast<std::size_t>(i)]));
      for (int i = 0; i < agents; ++i) {
        batches[static_cast<std::size_t>(i)].actions[static_cast<std::size_t>(p)] =
            rec.action_index[static_cast<std::size_t>(i)];
        batches[static_cast<std::size_t>(i)].increments[static_cast<std::size_t>(p)] = incs;
      }
    });
    for (int i = 0; i < agents; ++i) {
      const auto rep = info::independence_audit(batches[static_cast<std::size_t>(i)]);
      total_flags += static_cast<long>(rep.flags.size());
      add_value(r, "pairs_checked_agent" + std::to_string(i),
                static_cast<double>(rep.pairs_checked));
    }
  } else if (f.team_coupled) {
    const auto tuple = canonical_team_policies(f, cfg)[1];
    const int agents = f.team_coupled->agents;
    std::vector<info::AuditBatch> batches(static_cast<std::size_t>(agents));
    for (auto& b : batches) {
      b.actions.resize(static_cast<std::size_t>(n));
      b.increments.resize(static_cast<std::size_t>(n));
    }
    parallel_paths(n, workers, [&](long p) {
      std::vector<sde::NoisePlan> plans;
      for (int i = 0; i < agents; ++i)
        plans.push_back(sde::sample_brownian(grid, f.team_coupled->local_dim, cfg.seed, p,
                                             static_cast<std::uint64_t>(i)));
      const auto paths = info::simulate_team_decoupled(*f.team_coupled, tuple, grid, plans,
                                                       f.x0s);
      std::vector<std::vector<double>> incs;
      for (int i = 0; i < agents; ++i)
        append_channels(incs, macro_sums(plans[static_cast<std::size_t>(i)]));
      for (int i = 0; i < agents; ++i) {
        batches[static_cast<std::size_t>(i)].actions[static_cast<std::size_t>(p)] =
            paths[static_cast<std::size_t>(i)].action_index;
        batches[static_cast<std::size_t>(i)].increments[static_cast<std::size_t>(p)] = incs;
      }
    });
    for (int i = 0; i < agents; ++i) {
      const auto rep = info::independence_audit(batches[static_cast<std::size_t>(i)]);
      total_flags += static_cast<long>(rep.flags.size());
      add_value(r, "pairs_checked_agent" + std::to_string(i),
                static_cast<double>(rep.pairs_checked));
    }
  }
  add_value(r, "correlation_flags", static_cast<double>(total_flags));
  add_flag(r, "independence_clean", total_flags == 0);
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& cfg) {
  const auto kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    throw std::invalid_argument("unknown experiment kind: " + cfg.kind);

  ResultRecord r;
  r.kind = cfg.kind;
  r.version = kVersion;
  r.config = cfg.to_json();

  const auto t0 = std::chrono::steady_clock::now();
  try {
    json params = cfg.fixture_params;
    params["T"] = cfg.T;
    const auto fixture = fixtures::make_fixture(cfg.fixture, params);
    if (cfg.kind == "validate") run_validate(cfg, fixture, r);
    else if (cfg.kind == "martingale") run_martingale(cfg, fixture, r);
    else if (cfg.kind == "second_moment") run_second_moment(cfg, fixture, r);
    else if (cfg.kind == "l1_continuity") run_l1_continuity(cfg, fixture, r);
    else if (cfg.kind == "estimator_equivalence") run_estimator_equivalence(cfg, fixture, r);
    else if (cfg.kind == "dynkin") run_dynkin(cfg, fixture, r);
    else if (cfg.kind == "h_sweep") run_h_sweep(cfg, fixture, r);
    else if (cfg.kind == "pomdp_enum") run_pomdp_enum(cfg, fixture, r);
    else if (cfg.kind == "team_enum") run_team_enum(cfg, fixture, r);
    else if (cfg.kind == "independence_audit") run_independence_audit(cfg, fixture, r);
  } catch (const std::exception& e) {
    throw std::runtime_error("experiment '" + cfg.kind + "' on fixture '" + cfg.fixture +
                             "': " + e.what());
  }
  r.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------
// Record files and replay

void append_record(const ResultRecord& record, const std::string& json_path,
                   const std::string& csv_path) {
  {
    std::ofstream out(json_path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + json_path);
    out << record.to_json().dump() << "\n";
  }
  {
    const bool fresh = !std::ifstream(csv_path).good();
    std::ofstream out(csv_path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + csv_path);
    if (fresh) out << "row_type,kind,name,mean_or_value,se,n,pass\n";
    out << record.to_csv();
  }
}

ResultRecord read_record(const std::string& json_path, int index) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open " + json_path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  if (lines.empty()) throw std::runtime_error("no records in " + json_path);
  const std::size_t i = index < 0 ? lines.size() - 1 : static_cast<std::size_t>(index);
  if (i >= lines.size()) throw std::out_of_range("record index out of range");
  return ResultRecord::from_json(json::parse(lines[i]));
}

bool records_equivalent(const ResultRecord& a, const ResultRecord& b) {
  if (a.kind != b.kind || a.estimates.size() != b.estimates.size() ||
      a.values.size() != b.values.size() || a.flags.size() != b.flags.size())
    return false;
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    const auto& x = a.estimates[i];
    const auto& y = b.estimates[i];
    if (x.name != y.name || x.mean != y.mean || x.se != y.se || x.n != y.n) return false;
  }
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a.values[i].name != b.values[i].name || a.values[i].value != b.values[i].value)
      return false;
  for (std::size_t i = 0; i < a.flags.size(); ++i)
    if (a.flags[i].name != b.flags[i].name || a.flags[i].pass != b.flags[i].pass)
      return false;
  return true;
}

ReplayResult replay(const std::string& record_path, int index, int workers_override,
                    std::int64_t seed_override) {
  ReplayResult res;
  res.original = read_record(record_path, index);
  ExperimentConfig cfg = ExperimentConfig::from_json(res.original.config);
  if (workers_override > 0) cfg.workers = workers_override;
  if (seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed_override);
    res.seed_overridden = true;
  }
  res.version_mismatch = res.original.version != kVersion;
  res.rerun = run_experiment(cfg);
  if (res.version_mismatch)
    res.rerun.warnings.push_back("replaying a record written by version " +
                                 res.original.version);
  if (res.seed_overridden)
    res.rerun.warnings.push_back("seed overridden: comparison run, not a replay");
  res.bit_identical = records_equivalent(res.original, res.rerun);
  return res;
}

}  // namespace ctrldiff::harness
