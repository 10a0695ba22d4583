#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrldiff/cost.hpp"
#include "ctrldiff/info.hpp"
#include "ctrldiff/model.hpp"
#include "ctrldiff/policy.hpp"

namespace ctrldiff::fixtures {

/// A named benchmark problem: exactly one of the model slots is populated,
/// together with its cost, start state and default boxes/quantizer.
struct Fixture {
  std::string name;
  std::optional<DiffusionModel> diffusion;
  std::optional<info::PartiallyObservedModel> pomdp;
  std::optional<info::LocalMeasurementTeamModel> team_local;
  std::optional<info::CoupledLocalStateTeamModel> team_coupled;

  cost::CostSpec cost;
  Vec x0;                 // single-state fixtures
  std::vector<Vec> x0s;   // coupled-team fixtures
  Vec state_box_lo, state_box_hi;
  policy::ObservationQuantizer quantizer;  // observation fixtures
};

/// Builds a fixture by name; `params` may override the documented scalar
/// parameters (horizon "T", drift scales, observation gain, coupling, ...).
Fixture make_fixture(const std::string& name, const nlohmann::json& params = {});

std::vector<std::string> fixture_names();

}  // namespace ctrldiff::fixtures
