#include "ctrldiff/estimate.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace ctrldiff {

double pairwise_sum(const double* values, long n) {
  if (n <= 8) {
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const long mid = n / 2;
  return pairwise_sum(values, mid) + pairwise_sum(values + mid, n - mid);
}

double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(values.data(), static_cast<long>(values.size()));
}

EstimateWithError summarize(const std::vector<double>& values) {
  const long n = static_cast<long>(values.size());
  if (n < 1) throw std::invalid_argument("summarize: need at least one sample");
  EstimateWithError e;
  e.n = n;
  e.mean = pairwise_sum(values) / static_cast<double>(n);
  if (n == 1) return e;
  std::vector<double> sq(values.size());
  for (long i = 0; i < n; ++i) {
    const double d = values[i] - e.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (static_cast<double>(n) * static_cast<double>(n - 1));
  e.standard_error = std::sqrt(var);
  return e;
}

double combined_se(const EstimateWithError& a, const EstimateWithError& b) {
  return std::sqrt(a.standard_error * a.standard_error +
                   b.standard_error * b.standard_error);
}

void parallel_paths(long n, int workers, const std::function<void(long)>& body) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  const long chunk = std::max<long>(1, n / (8L * workers));
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    try {
      for (;;) {
        const long begin = next.fetch_add(chunk);
        if (begin >= n) return;
        const long end = std::min(begin + chunk, n);
        for (long i = begin; i < end; ++i) body(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> map_paths(long n, int workers, const std::function<double(long)>& f) {
  std::vector<double> out(static_cast<std::size_t>(n));
  parallel_paths(n, workers, [&](long i) { out[static_cast<std::size_t>(i)] = f(i); });
  return out;
}

}  // namespace ctrldiff
