#include "ctrldiff/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctrldiff/rng.hpp"

namespace ctrldiff {

DiffusionModel DiffusionModel::without_drift() const {
  DiffusionModel m = *this;
  const int n = state_dim;
  m.drift = [n](const Vec&, const Vec&) { return Vec::Zero(n); };
  return m;
}

AssumptionReport validate_assumptions(const DiffusionModel& model, long probe_count,
                                      const Vec& probe_lo, const Vec& probe_hi,
                                      std::uint64_t seed) {
  if (probe_count < 1) throw std::invalid_argument("validate_assumptions: probe_count >= 1");
  if (probe_lo.size() != model.state_dim || probe_hi.size() != model.state_dim)
    throw std::invalid_argument("validate_assumptions: probe box dimension mismatch");
  for (int d = 0; d < model.state_dim; ++d)
    if (!(probe_lo[d] <= probe_hi[d]))
      throw std::invalid_argument("validate_assumptions: empty probe box");

  AssumptionReport rep;
  rep.probes = probe_count;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  bool all_finite = true;

  Vec x(model.state_dim), u(model.action_dim);
  for (long p = 0; p < probe_count; ++p) {
    for (int d = 0; d < model.state_dim; ++d) {
      const double t = rng::uniform01(seed, rng::Stream::probe, p, 0, d);
      x[d] = probe_lo[d] + t * (probe_hi[d] - probe_lo[d]);
    }
    for (int d = 0; d < model.action_dim; ++d) {
      const double t = rng::uniform01(seed, rng::Stream::probe, p, 1, d);
      u[d] = model.action_lo[d] + t * (model.action_hi[d] - model.action_lo[d]);
    }

    const Vec b = model.drift(x, u);
    const Mat sigma = model.diffusion(x);
    rep.max_drift_norm = std::max(rep.max_drift_norm, b.norm());
    rep.max_diffusion_norm = std::max(rep.max_diffusion_norm, sigma.norm());

    const Mat a = 0.5 * sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(a);
    const double lambda_min = eig.eigenvalues().minCoeff();
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, lambda_min);
    all_finite = all_finite && b.allFinite() && sigma.allFinite();
  }

  rep.bounds_pass = all_finite && rep.max_drift_norm <= model.drift_bound &&
                    rep.max_diffusion_norm <= model.drift_bound;
  rep.ellipticity_pass = rep.min_eigenvalue >= model.ellipticity;
  // lambda_min(sigma sigma^T) > 0 at every probe means sigma is invertible there
  rep.invertible = rep.min_eigenvalue > 0.0;
  return rep;
}

}  // namespace ctrldiff
