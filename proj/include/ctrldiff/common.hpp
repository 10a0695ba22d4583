#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ctrldiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a simulated state leaves the finite range; carries the inner
/// step index at which the blow-up was detected.
class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(const std::string& what, long step_index)
      : std::runtime_error(what + " (inner step " + std::to_string(step_index) + ")"),
        step_index_(step_index) {}

  long step_index() const noexcept { return step_index_; }

 private:
  long step_index_;
};

/// Raised when a matrix operation degenerates (singular diffusion, etc.);
/// carries the inner step index of the offending path point.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, long step_index)
      : std::runtime_error(what + " (inner step " + std::to_string(step_index) + ")"),
        step_index_(step_index) {}

  long step_index() const noexcept { return step_index_; }

 private:
  long step_index_;
};

inline Vec vec1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

inline Vec vec2(double x, double y) {
  Vec v(2);
  v[0] = x;
  v[1] = y;
  return v;
}

}  // namespace ctrldiff
