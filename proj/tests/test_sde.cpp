#include <doctest.h>

#include <cmath>

#include "ctrldiff/model.hpp"
#include "ctrldiff/sde.hpp"
#include "support.hpp"

using namespace ctrldiff;
using namespace testsupport;

TEST_CASE("zero drift and zero noise keep the state at x0") {
  const TimeGrid grid(1.0, 4, 4);
  const auto model = zero_drift_model();
  const auto path = sde::simulate_path(model, constant_policy(grid), grid,
                                       sde::NoisePlan::zeros(grid, 1), vec1(0.7));
  REQUIRE(path.states.size() == 17);
  for (const auto& x : path.states) CHECK(x[0] == 0.7);
  // piecewise constancy of recorded actions
  for (int k = 0; k < grid.macro_steps; ++k) CHECK(path.action_index[k] == 0);
}

TEST_CASE("constant drift with zero noise integrates the ODE exactly") {
  const TimeGrid grid(1.0, 4, 8);
  const auto model = model_1d([](double, double) { return 0.5; }, [](double) { return 1.0; });
  const auto path = sde::simulate_path(model, constant_policy(grid), grid,
                                       sde::NoisePlan::zeros(grid, 1), vec1(1.0));
  // X_T = x0 + v*T with v = 0.5, T = 1; 32 equal Euler steps sum exactly
  CHECK(path.states.back()[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("paths are bit-identical across regeneration") {
  const TimeGrid grid(1.0, 4, 8);
  const auto model = tanh_model();
  const auto noise = sde::sample_brownian(grid, 1, 99, 3);
  const auto a = sde::simulate_path(model, uniform_policy(grid), grid, noise, vec1(1.0));
  const auto b = sde::simulate_path(model, uniform_policy(grid), grid, noise, vec1(1.0));
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i][0] == b.states[i][0]);
  CHECK(a.action_index == b.action_index);
}

TEST_CASE("mean terminal state matches a 16x finer inner grid") {
  const TimeGrid coarse(1.0, 4, 4);
  const TimeGrid fine(1.0, 4, 64);
  const auto model = tanh_model();
  const long n = 10000;

  auto mean_xT = [&](const TimeGrid& grid) {
    std::vector<double> xs(n);
    for (long p = 0; p < n; ++p) {
      const auto noise = sde::sample_brownian(grid, 1, 2024, p);
      xs[static_cast<std::size_t>(p)] =
          sde::simulate_path(model, constant_policy(grid, 2), grid, noise, vec1(1.0))
              .states.back()[0];
    }
    return summarize(xs);
  };

  const auto a = mean_xT(coarse);
  const auto b = mean_xT(fine);
  CHECK(std::abs(a.mean - b.mean) <= 3.0 * combined_se(a, b) + 0.01);
}

TEST_CASE("non-finite states raise an integration failure with the step index") {
  const TimeGrid grid(1.0, 2, 4);
  // test-only model, deliberately violating the bounds the validator checks
  auto model = model_1d([](double x, double) { return x * x * x * 1e150; },
                        [](double) { return 1.0; });
  CHECK_THROWS_AS(sde::simulate_path(model, constant_policy(grid), grid,
                                     sde::NoisePlan::zeros(grid, 1), vec1(10.0)),
                  IntegrationFailure);
}

TEST_CASE("dynkin residual vanishes for constant test functions") {
  const TimeGrid grid(1.0, 2, 4);
  const auto model = tanh_model();
  const auto f = sde::polynomial_bump(1e6, vec1(0.0), 2.5);  // effectively constant
  McOptions opt{200, 7, 1};
  const auto res = sde::dynkin_residual(model, constant_policy(grid), f, grid, opt, vec1(0.5));
  CHECK(res.mean == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("dynkin residual for x^2 under pure diffusion is near zero") {
  // Ito: d(x^2) = 2x sigma dB + sigma^2 dt, and the generator term removes
  // exactly sigma^2; the bump radius is far beyond reachable states.
  const TimeGrid grid(1.0, 4, 32);
  const auto model = zero_drift_model();
  const auto f = sde::polynomial_bump(50.0, vec1(1.0), 0.0);
  McOptions opt{20000, 11, 2};
  const auto res = sde::dynkin_residual(model, constant_policy(grid), f, grid, opt, vec1(0.0));
  CHECK(std::abs(res.mean) <= 3.0 * res.standard_error + 5.0 * grid.delta());
}

TEST_CASE("dynkin residual does not grow when delta halves") {
  const auto model = tanh_model();
  const auto f = sde::polynomial_bump(8.0, vec1(1.0), 0.0);
  McOptions opt{20000, 13, 2};
  EstimateWithError prev;
  bool first = true;
  for (int m : {8, 16, 32}) {
    const TimeGrid grid(1.0, 4, m);
    const auto res =
        sde::dynkin_residual(model, constant_policy(grid, 2), f, grid, opt, vec1(1.0));
    if (!first)
      CHECK(std::abs(res.mean) <= std::abs(prev.mean) + 3.0 * combined_se(prev, res));
    prev = res;
    first = false;
  }
}

TEST_CASE("second moments stay under the bounded-coefficient cap") {
  const TimeGrid grid(1.0, 4, 8);
  const auto model = tanh_model();  // |b| <= 1, |sigma| = 1
  McOptions opt{5000, 3, 2};
  const Vec x0 = vec1(1.0);
  const auto worst = sde::max_second_moment(model, uniform_policy(grid), grid, opt, x0);
  const double c = model.drift_bound;
  const double t = grid.horizon;
  const double reach = x0.norm() + c * t + c * std::sqrt(t);
  const double cap = reach * reach - x0.squaredNorm();
  CHECK(worst.mean <= x0.squaredNorm() + cap + 3.0 * worst.standard_error);
}

TEST_CASE("assumption validation matches analytic worst cases") {
  const Vec lo = vec1(-3.0), hi = vec1(3.0);

  SUBCASE("identity diffusion passes a 0.25 ellipticity floor") {
    const auto rep = validate_assumptions(tanh_model(), 500, lo, hi, 5);
    CHECK(rep.ellipticity_pass);
    CHECK(rep.min_eigenvalue == doctest::Approx(0.5));
    CHECK(rep.invertible);
  }

  SUBCASE("tanh drift with |u| <= 1 respects C = 1") {
    const auto rep = validate_assumptions(tanh_model(), 500, lo, hi, 6);
    CHECK(rep.bounds_pass);
    CHECK(rep.max_drift_norm <= 1.0);
  }

  SUBCASE("a nearly degenerate diffusion fails with the tiny eigenvalue reported") {
    DiffusionModel m;
    m.state_dim = 2;
    m.action_dim = 1;
    m.drift = [](const Vec&, const Vec&) { return Vec::Zero(2); };
    m.diffusion = [](const Vec&) {
      Mat s = Mat::Zero(2, 2);
      s(0, 0) = 1.0;
      s(1, 1) = 1e-6;
      return s;
    };
    m.drift_bound = 2.0;
    m.ellipticity = 0.1;
    m.action_lo = vec1(-1.0);
    m.action_hi = vec1(1.0);
    const auto rep = validate_assumptions(m, 100, vec2(-1, -1), vec2(1, 1), 7);
    CHECK_FALSE(rep.ellipticity_pass);
    CHECK(rep.min_eigenvalue == doctest::Approx(0.5e-12));
  }

  SUBCASE("probe parameters are validated") {
    CHECK_THROWS_AS(validate_assumptions(tanh_model(), 0, lo, hi, 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_assumptions(tanh_model(), 10, hi, lo, 1), std::invalid_argument);
  }
}
