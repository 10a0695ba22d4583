#include "ctrldiff/dt_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ctrldiff/rng.hpp"
#include "ctrldiff/sde.hpp"

namespace ctrldiff::dt {

void DiscreteControlProblem::validate(double row_eps) const {
  const long n_cells = cells.cell_count();
  const long n_actions = actions.size();
  if (horizon_steps < 1) throw std::invalid_argument("discrete problem: horizon >= 1");
  if (kernel_samples < min_samples)
    throw std::invalid_argument("discrete problem: kernel rows under-sampled (" +
                                std::to_string(kernel_samples) + " < " +
                                std::to_string(min_samples) + ")");
  if (static_cast<long>(kernel.size()) != n_cells ||
      static_cast<long>(stage_cost.size()) != n_cells ||
      static_cast<long>(terminal_cost.size()) != n_cells)
    throw std::invalid_argument("discrete problem: table shapes do not match cells");
  for (long x = 0; x < n_cells; ++x) {
    const auto sx = static_cast<std::size_t>(x);
    if (static_cast<long>(kernel[sx].size()) != n_actions ||
        static_cast<long>(stage_cost[sx].size()) != n_actions)
      throw std::invalid_argument("discrete problem: table shapes do not match actions");
    if (!(terminal_cost[sx] >= 0.0) || !std::isfinite(terminal_cost[sx]))
      throw std::invalid_argument("discrete problem: bad terminal cost");
    for (long u = 0; u < n_actions; ++u) {
      const auto su = static_cast<std::size_t>(u);
      const double c = stage_cost[sx][su];
      if (!(c >= 0.0) || !std::isfinite(c))
        throw std::invalid_argument("discrete problem: bad stage cost");
      double sum = 0.0;
      for (double pr : kernel[sx][su]) {
        if (!(pr >= 0.0)) throw std::invalid_argument("discrete problem: negative kernel entry");
        sum += pr;
      }
      if (std::abs(sum - 1.0) > row_eps)
        throw std::invalid_argument("discrete problem: kernel row (cell " +
                                    std::to_string(x) + ", action " + std::to_string(u) +
                                    ") sums to " + std::to_string(sum));
    }
  }
}

DiscreteControlProblem build_discrete_mdp(const DiffusionModel& model,
                                          const policy::StateCells& cells,
                                          const policy::ActionGrid& actions,
                                          const TimeGrid& grid, long n_kernel,
                                          const cost::CostSpec& cost, std::uint64_t seed,
                                          int workers, KernelStart start,
                                          long min_samples) {
  const long n_cells = cells.cell_count();
  const long n_actions = actions.size();
  if (n_kernel < min_samples)
    throw std::invalid_argument("build_discrete_mdp: n_kernel = " +
                                std::to_string(n_kernel) + " below required minimum " +
                                std::to_string(min_samples) + " per (cell, action) row");

  DiscreteControlProblem problem;
  problem.horizon_steps = grid.macro_steps;
  problem.cells = cells;
  problem.actions = actions;
  problem.kernel_samples = n_kernel;
  problem.min_samples = min_samples;
  problem.kernel.assign(static_cast<std::size_t>(n_cells),
                        std::vector<std::vector<double>>(
                            static_cast<std::size_t>(n_actions),
                            std::vector<double>(static_cast<std::size_t>(n_cells), 0.0)));
  problem.stage_cost.assign(static_cast<std::size_t>(n_cells),
                            std::vector<double>(static_cast<std::size_t>(n_actions), 0.0));
  problem.terminal_cost.resize(static_cast<std::size_t>(n_cells));
  for (long x = 0; x < n_cells; ++x)
    problem.terminal_cost[static_cast<std::size_t>(x)] = cost.terminal(cells.center(x));

  // One macro step per one-step simulation; rows are seeded by (cell, action)
  // so the build is order-independent.
  const TimeGrid step_grid(grid.h(), 1, grid.inner_refine);
  const long rows = n_cells * n_actions;
  parallel_paths(rows, workers, [&](long row) {
    const long cell = row / n_actions;
    const long action = row % n_actions;
    const Vec u = actions.action(action);
    const Vec center = cells.center(cell);
    const std::uint64_t row_seed = rng::derive(seed, static_cast<std::uint64_t>(row));

    auto& krow = problem.kernel[static_cast<std::size_t>(cell)][static_cast<std::size_t>(action)];
    for (long s = 0; s < n_kernel; ++s) {
      Vec x = center;
      if (start == KernelStart::cell_uniform) {
        for (int d = 0; d < cells.dims(); ++d) {
          const double w = (cells.hi[d] - cells.lo[d]) / cells.per_dim[static_cast<std::size_t>(d)];
          const double t = rng::uniform01(row_seed, rng::Stream::kernel, s, 0, d);
          x[d] += (t - 0.5) * w;
        }
      }
      const sde::NoisePlan noise =
          sde::sample_brownian(step_grid, model.state_dim, row_seed, s);
      for (int m = 0; m < grid.inner_refine; ++m) {
        x = x + model.drift(x, u) * step_grid.delta() +
            model.diffusion(x) * noise.increment(m);
        if (!x.allFinite())
          throw IntegrationFailure("build_discrete_mdp: non-finite state in row (cell " +
                                       std::to_string(cell) + ", action " +
                                       std::to_string(action) + ")",
                                   m);
      }
      krow[static_cast<std::size_t>(cells.cell_of(x))] += 1.0;
    }
    for (double& pr : krow) pr /= static_cast<double>(n_kernel);

    McOptions hat_opt;
    hat_opt.n_paths = n_kernel;
    hat_opt.seed = rng::derive(row_seed, 0x5eedc057ULL);
    hat_opt.workers = 1;
    problem.stage_cost[static_cast<std::size_t>(cell)][static_cast<std::size_t>(action)] =
        cost::stage_cost_hat(model, center, u, cost, grid.h(), grid.inner_refine, hat_opt)
            .mean;
  });
  problem.validate();
  return problem;
}

std::pair<ValueTable, policy::MarkovTablePolicy> backward_induction(
    const DiscreteControlProblem& problem) {
  problem.validate();
  const long n_cells = problem.cells.cell_count();
  const long n_actions = problem.actions.size();
  const int n = problem.horizon_steps;

  ValueTable table;
  table.v.assign(static_cast<std::size_t>(n) + 1,
                 std::vector<double>(static_cast<std::size_t>(n_cells), 0.0));
  table.v[static_cast<std::size_t>(n)] = problem.terminal_cost;

  std::vector<std::vector<policy::WeightRow>> rows(
      static_cast<std::size_t>(n),
      std::vector<policy::WeightRow>(
          static_cast<std::size_t>(n_cells),
          policy::WeightRow(static_cast<std::size_t>(n_actions), 0.0)));

  for (int k = n - 1; k >= 0; --k) {
    const auto& next = table.v[static_cast<std::size_t>(k) + 1];
    for (long x = 0; x < n_cells; ++x) {
      const auto sx = static_cast<std::size_t>(x);
      double best = 0.0;
      long best_u = -1;
      for (long u = 0; u < n_actions; ++u) {
        const auto su = static_cast<std::size_t>(u);
        double q = problem.stage_cost[sx][su];
        const auto& krow = problem.kernel[sx][su];
        for (long y = 0; y < n_cells; ++y)
          q += krow[static_cast<std::size_t>(y)] * next[static_cast<std::size_t>(y)];
        if (best_u < 0 || q < best) {  // strict <: ties keep the lowest index
          best = q;
          best_u = u;
        }
      }
      table.v[static_cast<std::size_t>(k)][sx] = best;
      rows[static_cast<std::size_t>(k)][sx][static_cast<std::size_t>(best_u)] = 1.0;
    }
  }
  policy::MarkovTablePolicy pol(problem.actions, problem.cells, std::move(rows));
  return {std::move(table), std::move(pol)};
}

SolveResult solve_and_lift(const DiffusionModel& model, const cost::CostSpec& cost,
                           const policy::StateCells& cells,
                           const policy::ActionGrid& actions, const TimeGrid& grid,
                           long n_kernel, std::uint64_t seed, const Vec& x0, int workers) {
  SolveResult res;
  res.problem = build_discrete_mdp(model, cells, actions, grid, n_kernel, cost, seed, workers);
  auto [table, pol] = backward_induction(res.problem);
  res.values = std::move(table);
  res.lifted = policy::interpolate(
      std::make_shared<policy::MarkovTablePolicy>(std::move(pol)), grid);
  res.initial_cell = cells.cell_of(x0);
  res.optimal_value = res.values.v.front()[static_cast<std::size_t>(res.initial_cell)];
  return res;
}

namespace {

long checked_power(long base, long exponent, long limit) {
  long v = 1;
  for (long i = 0; i < exponent; ++i) {
    if (v > limit / base) return limit + 1;  // saturate instead of overflowing
    v *= base;
  }
  return v;
}

}  // namespace

WideSenseEnumResult enumerate_wide_sense(const info::PartiallyObservedModel& model,
                                         const cost::CostSpec& cost, const TimeGrid& grid,
                                         const policy::ObservationQuantizer& quantizer,
                                         const policy::ActionGrid& actions,
                                         const McOptions& opt, const Vec& x0,
                                         const EnumGuard& guard) {
  const int n = grid.macro_steps;
  const long n_actions = actions.size();
  if (n > guard.max_steps || quantizer.levels > guard.max_levels ||
      n_actions > guard.max_actions)
    throw std::invalid_argument("enumerate_wide_sense: class exceeds the size guard");

  // Full history at enumeration scale; key positions ordered (k, code).
  const int history_len = n;
  std::vector<long> key_space(static_cast<std::size_t>(n));
  long total_keys = 0;
  for (int k = 0; k < n; ++k) {
    key_space[static_cast<std::size_t>(k)] =
        checked_power(quantizer.codes_per_sample(), std::min(k + 1, history_len),
                      guard.max_candidates);
    total_keys += key_space[static_cast<std::size_t>(k)];
  }
  const long candidates = checked_power(n_actions, total_keys, guard.max_candidates);
  if (candidates > guard.max_candidates)
    throw std::invalid_argument("enumerate_wide_sense: " + std::to_string(total_keys) +
                                " keys give more than " +
                                std::to_string(guard.max_candidates) + " candidates");

  std::vector<int> assignment(static_cast<std::size_t>(total_keys), 0);
  auto build = [&]() {
    std::vector<std::map<long, policy::WeightRow>> rows(static_cast<std::size_t>(n));
    long pos = 0;
    for (int k = 0; k < n; ++k) {
      for (long code = 0; code < key_space[static_cast<std::size_t>(k)]; ++code, ++pos) {
        policy::WeightRow row(static_cast<std::size_t>(n_actions), 0.0);
        row[static_cast<std::size_t>(assignment[static_cast<std::size_t>(pos)])] = 1.0;
        rows[static_cast<std::size_t>(k)].emplace(code, std::move(row));
      }
    }
    return std::make_shared<policy::WideSensePolicy>(actions, quantizer, history_len,
                                                     std::move(rows));
  };

  WideSenseEnumResult res;
  for (long c = 0; c < candidates; ++c) {
    auto cand = build();
    const auto value = cost::mc_cost_pomdp(model, policy::interpolate(cand, grid), cost,
                                           grid, opt, x0);
    if (res.candidates == 0 || value.mean < res.value.mean) {
      res.best = cand;
      res.value = value;
    }
    ++res.candidates;
    // next assignment in lexicographic order (rightmost position fastest)
    for (long pos = total_keys - 1; pos >= 0; --pos) {
      auto& a = assignment[static_cast<std::size_t>(pos)];
      if (++a < n_actions) break;
      a = 0;
    }
  }
  return res;
}

OpenLoopEnumResult enumerate_open_loop(const info::PartiallyObservedModel& model,
                                       const cost::CostSpec& cost, const TimeGrid& grid,
                                       const policy::ActionGrid& actions,
                                       const McOptions& opt, const Vec& x0,
                                       const EnumGuard& guard) {
  const int n = grid.macro_steps;
  const long n_actions = actions.size();
  const long candidates = checked_power(n_actions, n, guard.max_candidates);
  if (candidates > guard.max_candidates)
    throw std::invalid_argument("enumerate_open_loop: class exceeds the size guard");

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  OpenLoopEnumResult res;
  for (long c = 0; c < candidates; ++c) {
    std::vector<policy::WeightRow> rows;
    for (int k = 0; k < n; ++k) {
      policy::WeightRow row(static_cast<std::size_t>(n_actions), 0.0);
      row[static_cast<std::size_t>(assignment[static_cast<std::size_t>(k)])] = 1.0;
      rows.push_back(std::move(row));
    }
    auto cand = std::make_shared<policy::OpenLoopPolicy>(actions, std::move(rows));
    const auto value = cost::mc_cost_pomdp(model, policy::interpolate(cand, grid), cost,
                                           grid, opt, x0);
    if (res.candidates == 0 || value.mean < res.value.mean) {
      res.best = cand;
      res.value = value;
    }
    ++res.candidates;
    for (long pos = n - 1; pos >= 0; --pos) {
      auto& a = assignment[static_cast<std::size_t>(pos)];
      if (++a < n_actions) break;
      a = 0;
    }
  }
  return res;
}

std::vector<std::shared_ptr<const policy::DiscretePolicy>> enumerate_markov_tables(
    const policy::ActionGrid& actions, const policy::StateCells& cells, int steps,
    bool stationary, long max_candidates) {
  const long n_actions = actions.size();
  const long n_cells = cells.cell_count();
  const long slots = stationary ? n_cells : n_cells * steps;
  const long count = checked_power(n_actions, slots, max_candidates);
  if (count > max_candidates)
    throw std::invalid_argument("enumerate_markov_tables: class exceeds the size guard");

  std::vector<std::shared_ptr<const policy::DiscretePolicy>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> assignment(static_cast<std::size_t>(slots), 0);
  for (long c = 0; c < count; ++c) {
    std::vector<std::vector<policy::WeightRow>> rows(
        static_cast<std::size_t>(steps),
        std::vector<policy::WeightRow>(
            static_cast<std::size_t>(n_cells),
            policy::WeightRow(static_cast<std::size_t>(n_actions), 0.0)));
    for (int k = 0; k < steps; ++k)
      for (long x = 0; x < n_cells; ++x) {
        const long slot = stationary ? x : static_cast<long>(k) * n_cells + x;
        rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(x)]
            [static_cast<std::size_t>(assignment[static_cast<std::size_t>(slot)])] = 1.0;
      }
    out.push_back(std::make_shared<policy::MarkovTablePolicy>(actions, cells, std::move(rows)));
    for (long pos = slots - 1; pos >= 0; --pos) {
      auto& a = assignment[static_cast<std::size_t>(pos)];
      if (++a < n_actions) break;
      a = 0;
    }
  }
  return out;
}

std::vector<std::shared_ptr<const policy::DiscretePolicy>> enumerate_wide_sense_tables(
    const policy::ActionGrid& actions, const policy::ObservationQuantizer& quantizer,
    int steps, int history_len, long max_candidates) {
  const long n_actions = actions.size();
  std::vector<long> key_space(static_cast<std::size_t>(steps));
  long slots = 0;
  for (int k = 0; k < steps; ++k) {
    key_space[static_cast<std::size_t>(k)] = checked_power(
        quantizer.codes_per_sample(), std::min(k + 1, history_len), max_candidates);
    slots += key_space[static_cast<std::size_t>(k)];
  }
  const long count = checked_power(n_actions, slots, max_candidates);
  if (count > max_candidates)
    throw std::invalid_argument("enumerate_wide_sense_tables: class exceeds the size guard");

  std::vector<std::shared_ptr<const policy::DiscretePolicy>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> assignment(static_cast<std::size_t>(slots), 0);
  for (long c = 0; c < count; ++c) {
    std::vector<std::map<long, policy::WeightRow>> rows(static_cast<std::size_t>(steps));
    long pos = 0;
    for (int k = 0; k < steps; ++k)
      for (long code = 0; code < key_space[static_cast<std::size_t>(k)]; ++code, ++pos) {
        policy::WeightRow row(static_cast<std::size_t>(n_actions), 0.0);
        row[static_cast<std::size_t>(assignment[static_cast<std::size_t>(pos)])] = 1.0;
        rows[static_cast<std::size_t>(k)].emplace(code, std::move(row));
      }
    out.push_back(std::make_shared<policy::WideSensePolicy>(actions, quantizer, history_len,
                                                            std::move(rows)));
    for (long pos2 = slots - 1; pos2 >= 0; --pos2) {
      auto& a = assignment[static_cast<std::size_t>(pos2)];
      if (++a < n_actions) break;
      a = 0;
    }
  }
  return out;
}

TeamEnumResult team_brute_force(
    const std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>>& classes,
    const std::function<EstimateWithError(const policy::TeamPolicyTuple&)>& evaluate,
    long guard) {
  const int agents = static_cast<int>(classes.size());
  if (agents < 1) throw std::invalid_argument("team_brute_force: no agents");
  long product = 1;
  for (const auto& cls : classes) {
    if (cls.empty()) throw std::invalid_argument("team_brute_force: empty agent class");
    if (product > guard / static_cast<long>(cls.size()))
      throw std::invalid_argument("team_brute_force: product class exceeds guard " +
                                  std::to_string(guard));
    product *= static_cast<long>(cls.size());
  }

  std::vector<std::size_t> pick(static_cast<std::size_t>(agents), 0);
  TeamEnumResult res;
  for (long c = 0; c < product; ++c) {
    policy::TeamPolicyTuple tuple;
    for (int i = 0; i < agents; ++i)
      tuple.members.push_back(classes[static_cast<std::size_t>(i)][pick[static_cast<std::size_t>(i)]]);
    const auto value = evaluate(tuple);
    if (res.evaluated == 0 || value.mean < res.value.mean) {
      res.best = tuple;
      res.value = value;
    }
    ++res.evaluated;
    for (int i = agents - 1; i >= 0; --i) {
      auto& p = pick[static_cast<std::size_t>(i)];
      if (++p < classes[static_cast<std::size_t>(i)].size()) break;
      p = 0;
    }
  }
  return res;
}

}  // namespace ctrldiff::dt
