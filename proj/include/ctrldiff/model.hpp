#pragma once

#include <cstdint>
#include <functional>
#include <map>

#include "ctrldiff/common.hpp"

namespace ctrldiff {

using DriftFn = std::function<Vec(const Vec& state, const Vec& action)>;
using DiffusionFn = std::function<Mat(const Vec& state)>;

/// Controlled diffusion dX = b(X,U)dt + sigma(X)dB with uniformly bounded
/// coefficients and uniformly elliptic diffusion.  `drift_bound` is the
/// declared common bound C on |b| and ||sigma||_F; `ellipticity` is the
/// declared lower bound on the eigenvalues of a(x) = (1/2) sigma sigma^T.
/// Both are verified by sampling, not certified.
struct DiffusionModel {
  int state_dim = 1;
  int action_dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  double drift_bound = 1.0;  // C
  double ellipticity = 0.1;  // C1_hat
  Vec action_lo, action_hi;  // compact action box
  std::map<double, double> lipschitz_radius_constants;  // diagnostic only

  /// Copy with the drift suppressed: the reference dynamics dX' = sigma(X')dB.
  DiffusionModel without_drift() const;
};

/// Worst cases found while probing a model over a state box and the action
/// box: the bound check for |b| and ||sigma||, the smallest eigenvalue of
/// a(x), and invertibility of sigma at every probe.
struct AssumptionReport {
  double max_drift_norm = 0.0;
  double max_diffusion_norm = 0.0;
  double min_eigenvalue = 0.0;
  bool bounds_pass = false;
  bool ellipticity_pass = false;
  bool invertible = false;
  long probes = 0;

  bool pass() const { return bounds_pass && ellipticity_pass && invertible; }
};

/// Samples `probe_count` points uniformly over [lo,hi] x action box (seeded,
/// reproducible) and reports worst cases against the declared constants.
AssumptionReport validate_assumptions(const DiffusionModel& model, long probe_count,
                                      const Vec& probe_lo, const Vec& probe_hi,
                                      std::uint64_t seed = 0);

}  // namespace ctrldiff
