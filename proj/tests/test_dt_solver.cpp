#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctrldiff/dt_solver.hpp"
#include "ctrldiff/fixtures.hpp"
#include "ctrldiff/rng.hpp"
#include "support.hpp"

using namespace ctrldiff;
using namespace testsupport;

namespace {

// Independent oracle: minimum expected cost over ALL deterministic policy
// tables, each evaluated by backward recursion under the fixed policy.
double enumerate_optimal_value(const dt::DiscreteControlProblem& p, long start_cell) {
  const long cells = p.cells.cell_count();
  const long actions = p.actions.size();
  const int n = p.horizon_steps;
  const long slots = cells * n;
  long tables = 1;
  for (long s = 0; s < slots; ++s) tables *= actions;

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(slots), 0);
  for (long t = 0; t < tables; ++t) {
    std::vector<double> v = p.terminal_cost;
    for (int k = n - 1; k >= 0; --k) {
      std::vector<double> next(static_cast<std::size_t>(cells));
      for (long x = 0; x < cells; ++x) {
        const int a = pick[static_cast<std::size_t>(k * cells + x)];
        double q = p.stage_cost[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
        for (long y = 0; y < cells; ++y)
          q += p.kernel[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)]
                        [static_cast<std::size_t>(y)] *
               v[static_cast<std::size_t>(y)];
        next[static_cast<std::size_t>(x)] = q;
      }
      v = std::move(next);
    }
    best = std::min(best, v[static_cast<std::size_t>(start_cell)]);
    for (long s = slots - 1; s >= 0; --s) {
      auto& a = pick[static_cast<std::size_t>(s)];
      if (++a < actions) break;
      a = 0;
    }
  }
  return best;
}

dt::DiscreteControlProblem random_problem(std::uint64_t seed) {
  auto u01 = [&](long step, long ch, long draw = 0) {
    return rng::uniform01(seed, rng::Stream::scenario, 0, step, ch, draw);
  };
  dt::DiscreteControlProblem p;
  const long cells = 1 + static_cast<long>(u01(0, 0) * 4.0);    // 1..4
  const long actions = 1 + static_cast<long>(u01(0, 1) * 3.0);  // 1..3
  p.horizon_steps = 1 + static_cast<int>(u01(0, 2) * 3.0);      // 1..3
  p.cells.lo = vec1(0.0);
  p.cells.hi = vec1(1.0);
  p.cells.per_dim = {static_cast<int>(cells)};
  p.actions = policy::quantize_actions(vec1(-1.0), vec1(1.0),
                                       {static_cast<int>(actions)});
  p.kernel_samples = 200;
  p.min_samples = 200;
  for (long x = 0; x < cells; ++x) {
    p.kernel.emplace_back();
    p.stage_cost.emplace_back();
    p.terminal_cost.push_back(u01(1, x));
    for (long a = 0; a < actions; ++a) {
      std::vector<double> row(static_cast<std::size_t>(cells));
      double sum = 0.0;
      for (long y = 0; y < cells; ++y) {
        row[static_cast<std::size_t>(y)] = 0.05 + u01(2, x * 16 + a, y);
        sum += row[static_cast<std::size_t>(y)];
      }
      for (auto& w : row) w /= sum;
      p.kernel.back().push_back(std::move(row));
      p.stage_cost.back().push_back(u01(3, x * 16 + a));
    }
  }
  return p;
}

}  // namespace

TEST_CASE("kernel build") {
  const TimeGrid grid(1.0, 2, 8);

  SUBCASE("motionless dynamics give point-mass kernel rows") {
    // tiny diffusion keeps one-step paths inside the start cell
    const auto model =
        model_1d([](double, double) { return 0.0; }, [](double) { return 1e-4; });
    policy::StateCells cells;
    cells.lo = vec1(-1.0);
    cells.hi = vec1(1.0);
    cells.per_dim = {4};
    const auto unit = cost_1d([](double, double) { return 1.0; },
                              [](double) { return 0.0; }, 1.0);
    const auto problem =
        dt::build_discrete_mdp(model, cells, grid_pm1(2), grid, 200, unit, 1);
    for (long x = 0; x < 4; ++x)
      for (long a = 0; a < 2; ++a) {
        CHECK(problem.kernel[x][a][x] == 1.0);
        // unit cost: every stage entry is exactly h
        CHECK(problem.stage_cost[x][a] == grid.h());
      }
  }

  SUBCASE("under-sampled builds fail naming the requirement") {
    const auto model = tanh_model();
    policy::StateCells cells;
    cells.lo = vec1(-1.0);
    cells.hi = vec1(1.0);
    cells.per_dim = {2};
    CHECK_THROWS_WITH_AS(
        dt::build_discrete_mdp(model, cells, grid_pm1(2), grid, 50, zero_cost(1.0), 1),
        "build_discrete_mdp: n_kernel = 50 below required minimum 200 per (cell, action) row",
        std::invalid_argument);
  }

  SUBCASE("rows match a 10x oversampled build within binomial error") {
    const auto model = tanh_model();
    policy::StateCells cells;
    cells.lo = vec1(-2.0);
    cells.hi = vec1(2.0);
    cells.per_dim = {5};
    const auto spec = cost_1d([](double x, double) { return std::min(x * x, 4.0); },
                              [](double) { return 0.0; }, 1.0);
    const long n1 = 400, n2 = 4000;
    const auto a = dt::build_discrete_mdp(model, cells, grid_pm1(3), grid, n1, spec, 21, 2);
    const auto b = dt::build_discrete_mdp(model, cells, grid_pm1(3), grid, n2, spec, 22, 2);
    for (long x = 0; x < 5; ++x)
      for (long u = 0; u < 3; ++u)
        for (long y = 0; y < 5; ++y) {
          const double p1 = a.kernel[x][u][y], p2 = b.kernel[x][u][y];
          const double pooled = (n1 * p1 + n2 * p2) / (n1 + n2);
          const double se =
              std::sqrt(std::max(pooled * (1.0 - pooled), 1e-12) * (1.0 / n1 + 1.0 / n2));
          CHECK(std::abs(p1 - p2) <= 3.0 * se + 1e-9);
        }
  }
}

TEST_CASE("backward induction") {
  SUBCASE("all-zero costs give zero values and lowest-index actions") {
    auto p = random_problem(7);
    for (auto& per_cell : p.stage_cost)
      for (auto& c : per_cell) c = 0.0;
    for (auto& c : p.terminal_cost) c = 0.0;
    const auto [values, pol] = dt::backward_induction(p);
    for (const auto& layer : values.v)
      for (double v : layer) CHECK(v == 0.0);
    for (int k = 0; k < p.horizon_steps; ++k)
      for (long x = 0; x < p.cells.cell_count(); ++x)
        CHECK(pol.row(k, x)[0] == 1.0);
  }

  SUBCASE("single cell, two actions, two steps") {
    dt::DiscreteControlProblem p;
    p.horizon_steps = 2;
    p.cells.lo = vec1(0.0);
    p.cells.hi = vec1(1.0);
    p.cells.per_dim = {1};
    p.actions = policy::quantize_actions(vec1(-1.0), vec1(1.0), {2});
    p.kernel = {{{1.0}, {1.0}}};
    p.stage_cost = {{0.1, 0.3}};
    p.terminal_cost = {0.0};
    p.kernel_samples = 200;

    // oracle: enumerate the four action sequences
    double best = std::numeric_limits<double>::infinity();
    for (int a0 = 0; a0 < 2; ++a0)
      for (int a1 = 0; a1 < 2; ++a1)
        best = std::min(best, p.stage_cost[0][a0] + p.stage_cost[0][a1]);
    CHECK(best == doctest::Approx(0.2).epsilon(1e-15));

    const auto [values, pol] = dt::backward_induction(p);
    CHECK(values.v[0][0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(pol.row(0, 0)[0] == 1.0);
    CHECK(pol.row(1, 0)[0] == 1.0);
  }

  SUBCASE("matches exhaustive policy enumeration on random small problems") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto p = random_problem(100 + s);
      const auto [values, pol] = dt::backward_induction(p);
      const double expect = enumerate_optimal_value(p, 0);
      CHECK(std::abs(values.v[0][0] - expect) <= 1e-12);
    }
  }

  SUBCASE("terminal layer equals the terminal table and values respect the cap") {
    const auto p = random_problem(55);
    const auto [values, pol] = dt::backward_induction(p);
    CHECK(values.v.back() == p.terminal_cost);
    double max_stage = 0.0, max_term = 0.0;
    for (const auto& per_cell : p.stage_cost)
      for (double c : per_cell) max_stage = std::max(max_stage, c);
    for (double c : p.terminal_cost) max_term = std::max(max_term, c);
    for (int k = 0; k <= p.horizon_steps; ++k)
      for (double v : values.v[static_cast<std::size_t>(k)])
        CHECK(v <= (p.horizon_steps - k) * max_stage + max_term + 1e-9);
  }

  SUBCASE("value grows with the horizon when costs are nonnegative") {
    auto p = random_problem(77);
    for (auto& c : p.terminal_cost) c = 0.0;
    auto shorter = p;
    shorter.horizon_steps = std::max(1, p.horizon_steps - 1);
    const auto [v_long, pol_a] = dt::backward_induction(p);
    const auto [v_short, pol_b] = dt::backward_induction(shorter);
    if (p.horizon_steps > shorter.horizon_steps)
      for (long x = 0; x < p.cells.cell_count(); ++x)
        CHECK(v_long.v[0][static_cast<std::size_t>(x)] >=
              v_short.v[0][static_cast<std::size_t>(x)] - 1e-12);
  }
}

TEST_CASE("solve and lift") {
  SUBCASE("zero cost problem lifts to zero Monte Carlo cost") {
    const TimeGrid grid(1.0, 2, 8);
    const auto model = tanh_model();
    policy::StateCells cells;
    cells.lo = vec1(-2.0);
    cells.hi = vec1(2.0);
    cells.per_dim = {3};
    const auto solved = dt::solve_and_lift(model, zero_cost(1.0), cells, grid_pm1(2), grid,
                                           200, 3, vec1(0.0), 2);
    CHECK(solved.optimal_value == 0.0);
    const auto eval = cost::mc_cost_direct(model, solved.lifted, zero_cost(1.0), grid,
                                           McOptions{200, 5, 1}, vec1(0.0));
    CHECK(eval.mean == 0.0);
  }

  SUBCASE("single-cell action-only problem solves exactly and lifts to the same cost") {
    const TimeGrid grid(1.0, 2, 16);
    const auto model = tanh_model();
    policy::StateCells cells;
    cells.lo = vec1(-4.0);
    cells.hi = vec1(4.0);
    cells.per_dim = {1};
    // action-only running cost: c1(-1) = 0.2, c1(+1) = 0.6, so the stage
    // costs are exactly (0.1, 0.3) at h = 1/2
    const auto spec = cost_1d([](double, double u) { return 0.4 + 0.2 * u; },
                              [](double) { return 0.0; }, 1.0);
    const auto solved =
        dt::solve_and_lift(model, spec, cells, grid_pm1(2), grid, 300, 9, vec1(0.0), 2);
    CHECK(solved.optimal_value == doctest::Approx(0.2).epsilon(1e-12));
    const auto eval = cost::mc_cost_direct(model, solved.lifted, spec, grid,
                                           McOptions{2000, 11, 2}, vec1(0.0));
    CHECK(std::abs(eval.mean - solved.optimal_value) <=
          1e-12 + 3.0 * eval.standard_error);
  }
}

TEST_CASE("wide-sense enumeration") {
  info::PartiallyObservedModel model;
  model.state_dim = 1;
  model.obs_dim = 1;
  model.action_dim = 1;
  model.drift = [](const Vec&, const Vec&, const Vec& u) { return vec1(u[0]); };
  model.diffusion = [](const Vec&, const Vec&) { return Mat::Identity(1, 1); };
  model.g = [](const Vec& x) { return vec1(std::tanh(2.0 * x[0])); };
  model.drift_bound = 1.0;
  model.ellipticity = 0.25;
  model.g_bound = 1.0;
  model.action_lo = vec1(-1.0);
  model.action_hi = vec1(1.0);

  policy::ObservationQuantizer quant;
  quant.lo = vec1(-2.0);
  quant.hi = vec1(2.0);
  quant.levels = 2;
  const auto agrid = grid_pm1(2);
  const TimeGrid grid(1.0, 2, 8);

  SUBCASE("all-zero costs tie and the lexicographically first map wins") {
    McOptions opt{50, 3, 1};
    const auto res =
        dt::enumerate_wide_sense(model, zero_cost(1.0), grid, quant, agrid, opt, vec1(0.0));
    CHECK(res.candidates == 64);  // 2 keys at step 0, 4 at step 1 -> 2^6 maps
    CHECK(res.value.mean == 0.0);
    for (const auto& per_key : res.best->rows())
      for (const auto& [key, row] : per_key) CHECK(row[0] == 1.0);
  }

  SUBCASE("an uninformative channel ties with the best open-loop policy") {
    auto quiet = model;
    quiet.g = [](const Vec&) { return vec1(0.0); };
    quiet.g_bound = 0.0;
    const auto spec = cost_1d([](double, double) { return 0.0; },
                              [](double x) { return std::min(x * x, 2.0); }, 1.0, 0.0, 2.0);
    McOptions opt{4000, 5, 2};
    const auto ws =
        dt::enumerate_wide_sense(quiet, spec, grid, quant, agrid, opt, vec1(0.0));
    const auto ol = dt::enumerate_open_loop(quiet, spec, grid, agrid, opt, vec1(0.0));
    CHECK(std::abs(ws.value.mean - ol.value.mean) <=
          3.0 * combined_se(ws.value, ol.value));
  }

  SUBCASE("an informative channel beats every open-loop policy") {
    const auto fixture = fixtures::make_fixture("pomdp_informative");
    const auto three = policy::quantize_actions(fixture.pomdp->action_lo,
                                                fixture.pomdp->action_hi, {3});
    McOptions opt{8000, 7, 2};
    const auto ws = dt::enumerate_wide_sense(*fixture.pomdp, fixture.cost, grid,
                                             fixture.quantizer, three, opt, fixture.x0);
    const auto ol =
        dt::enumerate_open_loop(*fixture.pomdp, fixture.cost, grid, three, opt, fixture.x0);
    CHECK(ol.value.mean - ws.value.mean >= 3.0 * combined_se(ws.value, ol.value));
  }

  SUBCASE("the class-size guard rejects large classes") {
    const TimeGrid long_grid(1.0, 4, 4);
    McOptions opt{10, 1, 1};
    CHECK_THROWS_AS(dt::enumerate_wide_sense(model, zero_cost(1.0), long_grid, quant, agrid,
                                             opt, vec1(0.0)),
                    std::invalid_argument);
    policy::ObservationQuantizer fine = quant;
    fine.levels = 3;
    const auto three = policy::quantize_actions(vec1(-1.0), vec1(1.0), {3});
    const TimeGrid g3(1.0, 3, 4);
    CHECK_THROWS_AS(
        dt::enumerate_wide_sense(model, zero_cost(1.0), g3, fine, three, opt, vec1(0.0)),
        std::invalid_argument);
  }
}

TEST_CASE("team brute force") {
  const auto agrid = grid_pm1(2);
  std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>> classes(2);
  for (int i = 0; i < 2; ++i)
    for (long a = 0; a < 2; ++a)
      classes[static_cast<std::size_t>(i)].push_back(
          std::make_shared<policy::OpenLoopPolicy>(
              policy::OpenLoopPolicy::constant(agrid, 2, a)));

  SUBCASE("ties on an ignored agent resolve to its first candidate") {
    // value depends only on agent 0's choice; constant-0 members win
    auto evaluate = [&](const policy::TeamPolicyTuple& tuple) {
      EstimateWithError e;
      e.n = 1;
      e.mean = tuple.member(0).row(0, 0)[0] > 0.5 ? 1.0 : 2.0;
      return e;
    };
    const auto res = dt::team_brute_force(classes, evaluate);
    CHECK(res.evaluated == 4);
    CHECK(res.value.mean == 1.0);
    CHECK(res.best.member(0).row(0, 0) == policy::WeightRow{1.0, 0.0});
    CHECK(res.best.member(1).row(0, 0) == policy::WeightRow{1.0, 0.0});  // tie -> first
  }

  SUBCASE("the product guard rejects oversized classes") {
    std::vector<std::vector<std::shared_ptr<const policy::DiscretePolicy>>> big(2);
    for (int i = 0; i < 2; ++i)
      for (long a = 0; a < 200; ++a)
        big[static_cast<std::size_t>(i)].push_back(
            std::make_shared<policy::OpenLoopPolicy>(
                policy::OpenLoopPolicy::constant(agrid, 1, a % 2)));
    auto evaluate = [](const policy::TeamPolicyTuple&) { return EstimateWithError{}; };
    CHECK_THROWS_AS(dt::team_brute_force(big, evaluate, 10000), std::invalid_argument);
  }
}

TEST_CASE("markov table enumeration covers the class in lexicographic order") {
  policy::StateCells cells;
  cells.lo = vec1(-1.0);
  cells.hi = vec1(1.0);
  cells.per_dim = {2};
  const auto agrid = grid_pm1(2);
  const auto tables = dt::enumerate_markov_tables(agrid, cells, 1, false);
  CHECK(tables.size() == 4);  // 2 cells, 2 actions, 1 step
  const auto* first = dynamic_cast<const policy::MarkovTablePolicy*>(tables[0].get());
  REQUIRE(first != nullptr);
  CHECK(first->rows()[0][0] == policy::WeightRow{1.0, 0.0});
  CHECK(first->rows()[0][1] == policy::WeightRow{1.0, 0.0});
  const auto* second = dynamic_cast<const policy::MarkovTablePolicy*>(tables[1].get());
  CHECK(second->rows()[0][0] == policy::WeightRow{1.0, 0.0});
  CHECK(second->rows()[0][1] == policy::WeightRow{0.0, 1.0});
}
