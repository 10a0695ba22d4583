#pragma once

#include <stdexcept>

namespace ctrldiff {

/// Two-level time grid: the horizon [0,T] splits into `macro_steps` control
/// intervals of length h = T / macro_steps, each refined into `inner_refine`
/// integration steps of length delta = h / inner_refine.  h and delta are
/// always derived by division, never stored.
struct TimeGrid {
  double horizon = 1.0;
  int macro_steps = 1;
  int inner_refine = 1;

  TimeGrid() = default;
  TimeGrid(double T, int n_macro, int m_inner)
      : horizon(T), macro_steps(n_macro), inner_refine(m_inner) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (n_macro < 1) throw std::invalid_argument("TimeGrid: macro_steps must be >= 1");
    if (m_inner < 1) throw std::invalid_argument("TimeGrid: inner_refine must be >= 1");
  }

  double h() const { return horizon / macro_steps; }
  double delta() const { return h() / inner_refine; }
  long inner_steps() const { return static_cast<long>(macro_steps) * inner_refine; }

  /// Macro step owning inner step j.
  int macro_of(long j) const { return static_cast<int>(j / inner_refine); }

  bool operator==(const TimeGrid&) const = default;
};

}  // namespace ctrldiff
