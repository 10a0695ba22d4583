#include <doctest.h>

#include <cmath>
#include <map>

#include "ctrldiff/policy.hpp"
#include "ctrldiff/rng.hpp"
#include "support.hpp"

using namespace ctrldiff;
using namespace testsupport;

TEST_CASE("quantize_actions") {
  SUBCASE("three levels over [-1,1] give the endpoints and midpoint") {
    const auto g = policy::quantize_actions(vec1(-1.0), vec1(1.0), {3});
    REQUIRE(g.size() == 3);
    CHECK(g.action(0)[0] == -1.0);
    CHECK(g.action(1)[0] == 0.0);
    CHECK(g.action(2)[0] == 1.0);
  }
  SUBCASE("a single level collapses to the midpoint") {
    const auto g = policy::quantize_actions(vec1(0.0), vec1(2.0), {1});
    REQUIRE(g.size() == 1);
    CHECK(g.action(0)[0] == 1.0);
  }
  SUBCASE("2-D grid enumerates row-major") {
    const auto g = policy::quantize_actions(vec2(0.0, 0.0), vec2(1.0, 1.0), {2, 2});
    REQUIRE(g.size() == 4);
    // exhaustive listing: last dimension fastest
    CHECK(g.action(0)[0] == 0.0);
    CHECK(g.action(0)[1] == 0.0);
    CHECK(g.action(1)[0] == 0.0);
    CHECK(g.action(1)[1] == 1.0);
    CHECK(g.action(2)[0] == 1.0);
    CHECK(g.action(2)[1] == 0.0);
    CHECK(g.action(3)[0] == 1.0);
    CHECK(g.action(3)[1] == 1.0);
    CHECK(g.flat_index({1, 0}) == 2);
  }
  SUBCASE("empty box is rejected") {
    CHECK_THROWS_AS(policy::quantize_actions(vec1(1.0), vec1(-1.0), {2}),
                    std::invalid_argument);
  }
}

TEST_CASE("row validation and sampling") {
  policy::check_row({0.5, 0.5}, 2);
  CHECK_THROWS_AS(policy::check_row({0.5, 0.4}, 2), std::invalid_argument);
  CHECK_THROWS_AS(policy::check_row({1.5, -0.5}, 2), std::invalid_argument);

  // deterministic rows
  for (int i = 0; i < 50; ++i) {
    const double u = rng::uniform01(1, rng::Stream::policy, i, 0, 0);
    CHECK(policy::sample_row({1.0, 0.0}, u) == 0);
    CHECK(policy::sample_row({0.0, 1.0}, u) == 1);
  }

  // frequency oracle for a (0.3, 0.7) row
  const long n = 100000;
  long count0 = 0;
  for (long i = 0; i < n; ++i) {
    const double u = rng::uniform01(2, rng::Stream::policy, i, 0, 0);
    if (policy::sample_row({0.3, 0.7}, u) == 0) ++count0;
  }
  const double freq = static_cast<double>(count0) / n;
  const double se = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(freq - 0.3) <= 3.0 * se);
}

TEST_CASE("interpolation holds the step action over the macro interval") {
  const TimeGrid grid(1.0, 2, 4);
  const auto g = grid_pm1(3);

  SUBCASE("constant policy returns the same action at all t") {
    auto pi = constant_policy(grid, 1);
    auto draws = pi.new_draws();
    policy::Information inf;
    for (double t : {0.0, 0.2, 0.5, 0.75, 1.0})
      CHECK(pi.action_at(t, inf, draws, 1, 0)[0] == 0.0);
  }

  SUBCASE("two-step deterministic policy switches at the step boundary") {
    std::vector<policy::WeightRow> rows = {{1, 0, 0}, {0, 0, 1}};
    auto pi = policy::interpolate(std::make_shared<policy::OpenLoopPolicy>(g, rows), grid);
    auto draws = pi.new_draws();
    policy::Information inf;
    CHECK(pi.action_at(0.25 * grid.h(), inf, draws, 1, 0)[0] == -1.0);
    CHECK(pi.action_at(1.5 * grid.h(), inf, draws, 1, 0)[0] == 1.0);  // a_1
  }

  SUBCASE("randomized rows draw once per path and hold within the interval") {
    std::vector<policy::WeightRow> rows(2, policy::WeightRow{0.5, 0.0, 0.5});
    auto pi = policy::interpolate(std::make_shared<policy::OpenLoopPolicy>(g, rows), grid);
    policy::Information inf;
    const long n = 10000;
    long low = 0;
    for (long p = 0; p < n; ++p) {
      auto draws = pi.new_draws();
      const double first = pi.action_at(0.1 * grid.h(), inf, draws, 42, p)[0];
      // never changes mid-interval
      CHECK(pi.action_at(0.9 * grid.h(), inf, draws, 42, p)[0] == first);
      if (first == -1.0) ++low;
    }
    const double freq = static_cast<double>(low) / n;
    CHECK(std::abs(freq - 0.5) <= 3.0 * std::sqrt(0.25 / n));
  }

  SUBCASE("missing steps are a validation failure") {
    std::vector<policy::WeightRow> rows = {{1, 0, 0}};  // one row, grid needs two
    CHECK_THROWS_AS(
        policy::interpolate(std::make_shared<policy::OpenLoopPolicy>(g, rows), grid),
        std::invalid_argument);
  }
}

TEST_CASE("interpolation reads back the discrete draws at step left endpoints") {
  const TimeGrid grid(1.0, 4, 2);
  const auto g = grid_pm1(3);
  std::vector<policy::WeightRow> rows(4, policy::WeightRow{0.25, 0.5, 0.25});
  auto base = std::make_shared<policy::OpenLoopPolicy>(g, rows);
  auto pi = policy::interpolate(base, grid);
  policy::Information inf;
  for (long p = 0; p < 50; ++p) {
    auto draws = pi.new_draws();
    auto replay_draws = pi.new_draws();
    std::vector<int> first_pass;
    for (int k = 0; k < 4; ++k) first_pass.push_back(pi.step_index(k, inf, draws, 9, p));
    for (int k = 0; k < 4; ++k) {
      const double t = k * grid.h();
      CHECK(pi.action_at(t, inf, replay_draws, 9, p)[0] == g.action(first_pass[k])[0]);
    }
  }
}

TEST_CASE("perturb_policy mixes rows toward uniform") {
  const auto g = grid_pm1(2);
  std::vector<policy::WeightRow> rows = {{1.0, 0.0}};
  policy::OpenLoopPolicy p(g, rows);

  const auto same = policy::perturb_policy(p, 0.0);
  CHECK(dynamic_cast<const policy::OpenLoopPolicy&>(*same).rows()[0] ==
        policy::WeightRow{1.0, 0.0});

  const auto uniform = policy::perturb_policy(p, 1.0);
  CHECK(dynamic_cast<const policy::OpenLoopPolicy&>(*uniform).rows()[0] ==
        policy::WeightRow{0.5, 0.5});

  const auto half = policy::perturb_policy(p, 0.5);
  CHECK(dynamic_cast<const policy::OpenLoopPolicy&>(*half).rows()[0] ==
        policy::WeightRow{0.75, 0.25});

  CHECK_THROWS_AS(policy::perturb_policy(p, 1.5), std::invalid_argument);
}

TEST_CASE("wide-sense keys cannot read future samples") {
  const auto g = grid_pm1(2);
  policy::ObservationQuantizer q;
  q.lo = vec1(-2.0);
  q.hi = vec1(2.0);
  q.levels = 2;
  std::vector<std::map<long, policy::WeightRow>> rows(3);
  for (int k = 0; k < 3; ++k)
    for (long code = 0; code < 8; ++code) rows[k][code] = {1.0, 0.0};
  policy::WideSensePolicy p(g, q, 4, rows);

  std::vector<Vec> samples = {vec1(0.0), vec1(1.0), vec1(-1.0), vec1(0.5)};
  policy::Information inf;
  inf.y_samples = &samples;
  const long key_before = p.key_of(1, inf, nullptr);
  // mutate samples with index > 1: the key must not change
  samples[2] = vec1(1.7);
  samples[3] = vec1(-1.7);
  CHECK(p.key_of(1, inf, nullptr) == key_before);
  // mutating an in-scope sample does change it
  samples[1] = vec1(-1.0);
  CHECK(p.key_of(1, inf, nullptr) != key_before);
}

TEST_CASE("history truncation keeps only the last L samples") {
  const auto g = grid_pm1(2);
  policy::ObservationQuantizer q;
  q.lo = vec1(-2.0);
  q.hi = vec1(2.0);
  q.levels = 2;
  std::vector<std::map<long, policy::WeightRow>> rows(4);
  for (int k = 0; k < 4; ++k)
    for (long code = 0; code < 4; ++code) rows[k][code] = {1.0, 0.0};
  policy::WideSensePolicy p(g, q, 2, rows);
  CHECK(p.samples_used(0) == 1);
  CHECK(p.samples_used(3) == 2);

  std::vector<Vec> samples = {vec1(1.0), vec1(1.0), vec1(-1.0), vec1(1.0)};
  policy::Information inf;
  inf.y_samples = &samples;
  const long key = p.key_of(3, inf, nullptr);
  samples[0] = vec1(-1.0);  // outside the truncated window
  samples[1] = vec1(-1.0);
  CHECK(p.key_of(3, inf, nullptr) == key);
}

TEST_CASE("unknown wide-sense keys name the missing row") {
  const auto g = grid_pm1(2);
  policy::ObservationQuantizer q;
  q.lo = vec1(-2.0);
  q.hi = vec1(2.0);
  q.levels = 2;
  std::vector<std::map<long, policy::WeightRow>> rows(1);
  rows[0][0] = {1.0, 0.0};
  policy::WideSensePolicy p(g, q, 1, rows);
  CHECK_THROWS_WITH_AS(p.row(0, 1), "wide_sense: missing row (k=0, key=1)",
                       std::invalid_argument);
}

TEST_CASE("team tuples are product form by construction") {
  const TimeGrid grid(1.0, 2, 2);
  const auto g = grid_pm1(2);
  policy::ObservationQuantizer q;
  q.lo = vec1(-2.0);
  q.hi = vec1(2.0);
  q.levels = 2;
  std::vector<std::map<long, policy::WeightRow>> rows(2);
  for (int k = 0; k < 2; ++k)
    for (long code = 0; code < 4; ++code)
      rows[k][code] = (code % 2 == 0) ? policy::WeightRow{1.0, 0.0}
                                      : policy::WeightRow{0.0, 1.0};
  policy::TeamPolicyTuple tuple;
  tuple.members.push_back(std::make_shared<policy::WideSensePolicy>(g, q, 1, rows));
  tuple.members.push_back(std::make_shared<policy::WideSensePolicy>(g, q, 1, rows));

  std::vector<Vec> obs_a = {vec1(1.0), vec1(-1.0)};
  std::vector<Vec> obs_b = {vec1(-1.0), vec1(1.0)};
  policy::Information inf_agent0;
  inf_agent0.y_samples = &obs_a;
  inf_agent0.agent = 0;
  const double u = 0.4;
  const int before = policy::sample_action(tuple.member(0), 1, inf_agent0, u);
  // agent 1's observations change; agent 0's action cannot
  obs_b[0] = vec1(1.5);
  obs_b[1] = vec1(1.5);
  CHECK(policy::sample_action(tuple.member(0), 1, inf_agent0, u) == before);
}

TEST_CASE("policies round-trip through text bit-exactly") {
  const auto g = grid_pm1(3);

  SUBCASE("open loop") {
    std::vector<policy::WeightRow> rows = {{0.1, 0.2, 0.7}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    policy::OpenLoopPolicy p(g, rows);
    auto restored = policy::from_text(policy::to_text(p));
    auto* q = dynamic_cast<policy::OpenLoopPolicy*>(restored.get());
    REQUIRE(q != nullptr);
    CHECK(q->rows() == p.rows());
    CHECK(q->actions() == p.actions());
  }

  SUBCASE("markov table") {
    policy::StateCells cells;
    cells.lo = vec1(-2.0);
    cells.hi = vec1(2.0);
    cells.per_dim = {4};
    std::vector<std::vector<policy::WeightRow>> rows(
        2, std::vector<policy::WeightRow>(4, {0.25, 0.25, 0.5}));
    rows[1][3] = {0.0, 1.0, 0.0};
    policy::MarkovTablePolicy p(g, cells, rows);
    auto restored = policy::from_text(policy::to_text(p));
    auto* q = dynamic_cast<policy::MarkovTablePolicy*>(restored.get());
    REQUIRE(q != nullptr);
    CHECK(q->rows() == p.rows());
    CHECK(q->cells() == p.cells());
  }

  SUBCASE("wide sense") {
    policy::ObservationQuantizer quant;
    quant.lo = vec1(-2.0);
    quant.hi = vec1(2.0);
    quant.levels = 2;
    std::vector<std::map<long, policy::WeightRow>> rows(2);
    rows[0][0] = {0.3, 0.3, 0.4};
    rows[0][1] = {1.0, 0.0, 0.0};
    rows[1][2] = {0.0, 0.0, 1.0};
    policy::WideSensePolicy p(g, quant, 2, rows);
    auto restored = policy::from_text(policy::to_text(p));
    auto* q = dynamic_cast<policy::WideSensePolicy*>(restored.get());
    REQUIRE(q != nullptr);
    CHECK(q->rows() == p.rows());
    CHECK(q->quantizer() == p.quantizer());
    CHECK(q->history_len() == p.history_len());
  }
}

TEST_CASE("state cells clamp outside the box and report it") {
  policy::StateCells cells;
  cells.lo = vec1(-1.0);
  cells.hi = vec1(1.0);
  cells.per_dim = {4};
  bool clamped = false;
  CHECK(cells.cell_of(vec1(-0.9), &clamped) == 0);
  CHECK_FALSE(clamped);
  CHECK(cells.cell_of(vec1(5.0), &clamped) == 3);
  CHECK(clamped);
  CHECK(cells.cell_of(vec1(-5.0), &clamped) == 0);
  CHECK(clamped);
  CHECK(cells.center(1)[0] == doctest::Approx(-0.25));
}
