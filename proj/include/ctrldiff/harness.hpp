#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrldiff/estimate.hpp"
#include "ctrldiff/fixtures.hpp"
#include "ctrldiff/policy.hpp"
#include "ctrldiff/time_grid.hpp"

namespace ctrldiff::harness {

/// The closed list of experiment kinds; each maps to one acceptance check.
std::vector<std::string> experiment_kinds();

/// Everything an experiment reads.  Every field is echoed into the result
/// record, so records never depend on unlogged defaults.
struct ExperimentConfig {
  std::string kind = "validate";
  std::string fixture = "tanh_drift";
  nlohmann::json fixture_params = nlohmann::json::object();

  double T = 1.0;
  int macro_steps = 8;
  int inner_refine = 16;

  int state_cells = 9;
  int action_levels = 3;
  int obs_levels = 2;
  int team_cells = 3;

  long n_paths = 10000;
  long n_kernel = 500;
  long probe_count = 4096;
  int challengers = 100;

  std::uint64_t seed = 12345;
  int workers = 1;

  double se_mult = 3.0;
  double dynkin_k = 5.0;
  double exact_eps = 1e-12;
  double kernel_row_eps = 1e-9;

  TimeGrid time_grid() const { return TimeGrid(T, macro_steps, inner_refine); }
  McOptions mc() const { return McOptions{n_paths, seed, workers}; }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Result of one experiment: inputs echoed bit-exactly, every estimate and
/// derived value produced, and the pass/fail flags.
struct ResultRecord {
  struct Estimate {
    std::string name;
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
  };
  struct Value {
    std::string name;
    double value = 0.0;
  };
  struct Flag {
    std::string name;
    bool pass = false;
  };

  std::string kind;
  std::string version;
  nlohmann::json config;
  std::vector<Estimate> estimates;
  std::vector<Value> values;
  std::vector<Flag> flags;
  std::vector<std::string> warnings;
  double duration_seconds = 0.0;

  bool pass() const;
  const Estimate& estimate(const std::string& name) const;
  double value(const std::string& name) const;
  bool flag(const std::string& name) const;

  nlohmann::json to_json() const;
  static ResultRecord from_json(const nlohmann::json& j);
  /// Comma-separated table: one row per estimate and per value.
  std::string to_csv() const;
};

/// Dispatches to the named experiment and collects the record.
ResultRecord run_experiment(const ExperimentConfig& config);

/// Appends the record to a JSON-lines file and its table to a CSV file
/// (records are append-only).
void append_record(const ResultRecord& record, const std::string& json_path,
                   const std::string& csv_path);

/// Reads a record back from a JSON-lines file (index -1 = last line).
ResultRecord read_record(const std::string& json_path, int index = -1);

struct ReplayResult {
  ResultRecord original;
  ResultRecord rerun;
  bool bit_identical = false;
  bool version_mismatch = false;
  bool seed_overridden = false;
};

/// Re-runs an experiment from its echoed inputs; all stochastic outputs must
/// be bit-identical to the stored record.  `workers_override` changes only
/// the worker count (results must not change); `seed_override` marks the
/// comparison as a non-replay run.
ReplayResult replay(const std::string& record_path, int index = -1,
                    int workers_override = -1, std::int64_t seed_override = -1);

/// Estimates and flags produced by two records are bit-identical.
bool records_equivalent(const ResultRecord& a, const ResultRecord& b);

// Canonical policy constructions shared by experiments (deterministic pure
// functions of the fixture and config, so records replay).
policy::ActionGrid default_action_grid(const fixtures::Fixture& f, int levels, int agent = 0);
std::vector<policy::InterpolatedPolicy> canonical_single_policies(
    const fixtures::Fixture& f, const ExperimentConfig& cfg);
std::vector<policy::TeamPolicyTuple> canonical_team_policies(const fixtures::Fixture& f,
                                                             const ExperimentConfig& cfg);

}  // namespace ctrldiff::harness
