#ifndef DOSEINS_TOOLS_JSON_IO_HPP
#define DOSEINS_TOOLS_JSON_IO_HPP

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "doseins/scenario.hpp"
#include "doseins/simulation.hpp"
#include "doseins/trial.hpp"

namespace doseins {

using json = nlohmann::json;

/// Document error: the message names the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError if `j` is not an object or has a key outside `allowed`.
void require_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context);

void to_json(json& j, const DoseCounts& c);
void from_json(const json& j, DoseCounts& c);
void to_json(json& j, const BoundariesInForce& b);
void to_json(json& j, const GuardCheck& g);
void to_json(json& j, const SkeletonBundle& b);
void to_json(json& j, const CohortOutcome& o);
void to_json(json& j, const CohortRecord& r);
void to_json(json& j, const InsertionRecord& r);
void to_json(json& j, const WeightState& w);
void to_json(json& j, const Selection& s);
void to_json(json& j, const ScenarioTruth& s);
void to_json(json& j, const FixedScenario& s);
void to_json(json& j, const RandomScenario& s);
void to_json(json& j, const BatchMetrics& m);

/// Grid, counts, eliminations, boundaries at the current dose and the
/// inserted-dose diagnostics.
json state_to_json(const TrialState& s, const EngineConfig& cfg);

/// Strict: outcome fields must be integers.
CohortOutcome cohort_outcome_from_json(const json& j, int default_patients);

/// Engine overrides on top of EngineConfig::defaults(variant, phi1); unknown
/// keys throw ConfigError.
EngineConfig engine_config_from_json(const json& j, Variant variant, AdaptiveMode mode, double c);
json engine_config_to_json(const EngineConfig& cfg);

RandomGenParams random_params_from_json(const json& j, double phi1, EfficacyShape shape);
json random_params_to_json(const RandomGenParams& p);

}  // namespace doseins

#endif  // DOSEINS_TOOLS_JSON_IO_HPP
