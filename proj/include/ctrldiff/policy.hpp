#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctrldiff/common.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::policy {

/// Uniform action grid over a compact box.  With `levels >= 2` the grid
/// includes both endpoints of each dimension; a single level collapses to
/// the box midpoint.  Flat indices enumerate row-major (last dim fastest).
struct ActionGrid {
  Vec lo, hi;
  std::vector<std::vector<double>> values;  // per-dimension, strictly increasing

  int dims() const { return static_cast<int>(values.size()); }
  long size() const;
  Vec action(long index) const;
  long flat_index(const std::vector<int>& per_dim) const;

  bool operator==(const ActionGrid& other) const;
};

ActionGrid quantize_actions(const Vec& lo, const Vec& hi, const std::vector<int>& levels);

/// One relaxed-control row: probability weights over ActionGrid indices.
using WeightRow = std::vector<double>;

/// Throws unless the row is a probability vector over n_actions entries
/// (nonnegative, sums to 1 within 1e-12).
void check_row(const WeightRow& row, long n_actions);

/// Inverse-CDF draw from a row given a uniform variate in (0,1).
int sample_row(const WeightRow& row, double u01);

/// Uniform partition of a state box into cells, with nearest-cell clamping
/// outside the box.  Clamp events are reported through the out-parameter so
/// callers can account for the aggregation bias.
struct StateCells {
  Vec lo, hi;
  std::vector<int> per_dim;

  int dims() const { return static_cast<int>(per_dim.size()); }
  long cell_count() const;
  long cell_of(const Vec& x, bool* clamped = nullptr) const;
  Vec center(long cell) const;

  bool operator==(const StateCells& other) const;
};

/// Per-coordinate uniform quantizer for observation samples over a box,
/// values outside the box clamping to the boundary levels.
struct ObservationQuantizer {
  Vec lo, hi;
  int levels = 1;

  int obs_dim() const { return static_cast<int>(lo.size()); }
  long codes_per_sample() const;
  long code_of(const Vec& y) const;

  bool operator==(const ObservationQuantizer& other) const;
};

/// The data a policy may read when choosing the step-k action.  Exactly one
/// information pattern is populated; `agent` selects the reader in team
/// settings (and the per-agent randomization channel).
struct Information {
  const Vec* state = nullptr;                  // fully observed / local state
  const std::vector<Vec>* y_samples = nullptr; // observation samples 0..k
  int agent = 0;
};

/// Common interface of the discrete-time policy classes: a keyed table of
/// relaxed-control rows.  Keys are computed from the information pattern and
/// by construction can only encode data with time index <= k.
class DiscretePolicy {
 public:
  virtual ~DiscretePolicy() = default;
  virtual const ActionGrid& actions() const = 0;
  virtual int steps() const = 0;
  virtual long key_of(int k, const Information& info, bool* clamped = nullptr) const = 0;
  virtual const WeightRow& row(int k, long key) const = 0;
  virtual std::shared_ptr<DiscretePolicy> perturbed(double eps) const = 0;
  virtual std::string type_name() const = 0;
};

/// Draws an action index for step k: key lookup then inverse-CDF sampling.
int sample_action(const DiscretePolicy& p, int k, const Information& info, double u01,
                  bool* clamped = nullptr);

/// Open-loop relaxed control: one row per macro step.
class OpenLoopPolicy final : public DiscretePolicy {
 public:
  OpenLoopPolicy(ActionGrid grid, std::vector<WeightRow> rows);
  /// Deterministic single-action policy holding `index` at every step.
  static OpenLoopPolicy constant(ActionGrid grid, int steps, long index);

  const ActionGrid& actions() const override { return grid_; }
  int steps() const override { return static_cast<int>(rows_.size()); }
  long key_of(int, const Information&, bool*) const override { return 0; }
  const WeightRow& row(int k, long key) const override;
  std::shared_ptr<DiscretePolicy> perturbed(double eps) const override;
  std::string type_name() const override { return "open_loop"; }

  const std::vector<WeightRow>& rows() const { return rows_; }

 private:
  ActionGrid grid_;
  std::vector<WeightRow> rows_;
};

/// Markov table policy: a row per (step, state cell).
class MarkovTablePolicy final : public DiscretePolicy {
 public:
  MarkovTablePolicy(ActionGrid grid, StateCells cells,
                    std::vector<std::vector<WeightRow>> rows);  // rows[k][cell]

  const ActionGrid& actions() const override { return grid_; }
  int steps() const override { return static_cast<int>(rows_.size()); }
  long key_of(int k, const Information& info, bool* clamped) const override;
  const WeightRow& row(int k, long key) const override;
  std::shared_ptr<DiscretePolicy> perturbed(double eps) const override;
  std::string type_name() const override { return "markov_table"; }

  const StateCells& cells() const { return cells_; }
  const std::vector<std::vector<WeightRow>>& rows() const { return rows_; }

 private:
  ActionGrid grid_;
  StateCells cells_;
  std::vector<std::vector<WeightRow>> rows_;
};

/// Wide-sense policy: rows keyed by the quantized history of observation
/// samples (Y_0, Y_h, ..., Y_kh), truncated to the most recent
/// `history_len` samples.  The key cannot encode samples with index > k.
class WideSensePolicy final : public DiscretePolicy {
 public:
  WideSensePolicy(ActionGrid grid, ObservationQuantizer quantizer, int history_len,
                  std::vector<std::map<long, WeightRow>> rows);  // rows[k][code]

  const ActionGrid& actions() const override { return grid_; }
  int steps() const override { return static_cast<int>(rows_.size()); }
  long key_of(int k, const Information& info, bool* clamped) const override;
  const WeightRow& row(int k, long key) const override;
  std::shared_ptr<DiscretePolicy> perturbed(double eps) const override;
  std::string type_name() const override { return "wide_sense"; }

  const ObservationQuantizer& quantizer() const { return quantizer_; }
  int history_len() const { return history_len_; }
  const std::vector<std::map<long, WeightRow>>& rows() const { return rows_; }

  /// Number of samples the step-k key reads: min(k+1, history_len).
  int samples_used(int k) const;
  /// Size of the step-k key space.
  long key_space(int k) const;

 private:
  ActionGrid grid_;
  ObservationQuantizer quantizer_;
  int history_len_;
  std::vector<std::map<long, WeightRow>> rows_;
};

/// One policy per agent; agent i's member is only ever handed agent-i
/// information, so the induced strategic measure is product-form.
struct TeamPolicyTuple {
  std::vector<std::shared_ptr<const DiscretePolicy>> members;

  int agents() const { return static_cast<int>(members.size()); }
  const DiscretePolicy& member(int i) const { return *members.at(i); }
};

/// Piecewise-constant continuous-time lift of a discrete policy: the step-k
/// action is drawn exactly once per path and held on [kh,(k+1)h).
class InterpolatedPolicy {
 public:
  InterpolatedPolicy() = default;
  InterpolatedPolicy(std::shared_ptr<const DiscretePolicy> base, TimeGrid grid);

  const DiscretePolicy& base() const { return *base_; }
  std::shared_ptr<const DiscretePolicy> base_ptr() const { return base_; }
  const TimeGrid& time_grid() const { return grid_; }

  /// Per-path cache of drawn action indices (-1 = not drawn yet).
  struct PathDraws {
    std::vector<int> index;
  };
  PathDraws new_draws() const;

  /// Action index for macro step k, drawn on first use from the path's
  /// policy randomization stream, cached afterwards.
  int step_index(int k, const Information& info, PathDraws& draws, std::uint64_t seed,
                 long path, bool* clamped = nullptr) const;

  /// Action coordinates at continuous time t in [0,T]; t selects the macro
  /// step, end point inclusive into the last step.
  Vec action_at(double t, const Information& info, PathDraws& draws, std::uint64_t seed,
                long path) const;

 private:
  std::shared_ptr<const DiscretePolicy> base_;
  TimeGrid grid_;
};

/// interpolate(discrete policy, grid): validates coverage of all macro steps.
InterpolatedPolicy interpolate(std::shared_ptr<const DiscretePolicy> base, TimeGrid grid);

/// (1-eps) * row + eps * uniform, applied to every row of the policy.
std::shared_ptr<DiscretePolicy> perturb_policy(const DiscretePolicy& p, double eps);

/// Structured-text (JSON) persistence; round-trips are bit-exact.
std::string to_text(const DiscretePolicy& p);
std::shared_ptr<DiscretePolicy> from_text(const std::string& text);
void save_policy(const DiscretePolicy& p, const std::string& path);
std::shared_ptr<DiscretePolicy> load_policy(const std::string& path);

}  // namespace ctrldiff::policy
