#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace ctrldiff {

/// Monte Carlo estimate with its standard error; the universal return
/// contract of every evaluator in the toolkit.
struct EstimateWithError {
  double mean = 0.0;
  double standard_error = 0.0;
  long n = 0;
};

/// Deterministic pairwise summation over a fixed index tree, so that the
/// reported value does not depend on how the work was scheduled.
double pairwise_sum(const double* values, long n);
double pairwise_sum(const std::vector<double>& values);

/// Mean and standard error with pairwise sums (n = 1 reports SE 0).
EstimateWithError summarize(const std::vector<double>& values);

/// sqrt(a.se^2 + b.se^2): the combined standard error of a difference.
double combined_se(const EstimateWithError& a, const EstimateWithError& b);

/// Sample-count and worker-count bundle used by all Monte Carlo evaluators.
struct McOptions {
  long n_paths = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
};

/// Runs body(i) for i in [0,n).  Work is chunked over `workers` threads;
/// outputs must be written to per-index slots, which keeps every downstream
/// reduction independent of the schedule.  Exceptions propagate.
void parallel_paths(long n, int workers, const std::function<void(long)>& body);

/// Convenience: evaluates f over path indices into an index-ordered vector.
std::vector<double> map_paths(long n, int workers, const std::function<double(long)>& f);

}  // namespace ctrldiff
