#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctrldiff/rng.hpp"
#include "ctrldiff/sde.hpp"

using namespace ctrldiff;

TEST_CASE("counter words are pure functions of the tuple") {
  const auto a = rng::word(42, rng::Stream::brownian, 7, 3, 1, 0);
  const auto b = rng::word(42, rng::Stream::brownian, 7, 3, 1, 0);
  CHECK(a == b);
  CHECK(a != rng::word(42, rng::Stream::brownian, 7, 3, 1, 1));
  CHECK(a != rng::word(42, rng::Stream::policy, 7, 3, 1, 0));
  CHECK(a != rng::word(43, rng::Stream::brownian, 7, 3, 1, 0));
}

TEST_CASE("uniforms stay inside the open unit interval") {
  for (int i = 0; i < 10000; ++i) {
    const double u = rng::uniform01(1, rng::Stream::policy, i, 0, 0);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("single-step grid gives exactly one increment per channel") {
  const TimeGrid grid(1.0, 1, 1);
  const auto plan = sde::sample_brownian(grid, 3, 9, 0);
  CHECK(plan.steps == 1);
  CHECK(plan.channels == 3);
  CHECK(plan.table.size() == 3);
}

TEST_CASE("noise plans regenerate bit-identically") {
  const TimeGrid grid(1.0, 4, 8);
  const auto a = sde::sample_brownian(grid, 2, 1234, 17);
  const auto b = sde::sample_brownian(grid, 2, 1234, 17);
  CHECK(a.table == b.table);
  const auto c = sde::sample_brownian(grid, 2, 1234, 18);
  CHECK(a.table != c.table);
  const auto d = sde::sample_brownian(grid, 2, 1234, 17, /*stream=*/5);
  CHECK(a.table != d.table);
}

TEST_CASE("first increment variance matches delta over many plans") {
  // Monte Carlo moment oracle: the empirical variance of a N(0, delta)
  // sample of size n has standard error delta * sqrt(2/(n-1)).
  const TimeGrid grid(1.0, 2, 4);
  const double delta = grid.delta();
  const long n = 100000;
  std::vector<double> first(n);
  for (long p = 0; p < n; ++p) first[p] = sde::sample_brownian(grid, 1, 77, p).inc(0, 0);

  double mean = 0.0;
  for (double v : first) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : first) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);

  const double se_var = delta * std::sqrt(2.0 / static_cast<double>(n - 1));
  CHECK(std::abs(var - delta) <= 3.0 * se_var);
  const double se_mean = std::sqrt(delta / static_cast<double>(n));
  CHECK(std::abs(mean) <= 3.0 * se_mean);
}

TEST_CASE("distinct path indices decorrelate") {
  const TimeGrid grid(1.0, 1, 1);
  const long n = 20000;
  double sum = 0.0;
  for (long p = 0; p < n; ++p)
    sum += sde::sample_brownian(grid, 1, 5, p).inc(0, 0) *
           sde::sample_brownian(grid, 1, 5, p + 1).inc(0, 0);
  const double corr = sum / static_cast<double>(n);  // increments have variance 1 here
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n)));
}
