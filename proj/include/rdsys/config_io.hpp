#pragma once

#include "rdsys/credit.hpp"

#include <json.hpp>

#include <string>

namespace rdsys {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const Table& t);
Table table_from_json(const Json& j);
Json to_json(const CoefficientField& f);
CoefficientField coefficient_field_from_json(const Json& j, int regimes, int rows, int cols);
Json to_json(const RateProfile& p);
RateProfile rate_profile_from_json(const Json& j);

Json to_json(const ModelSpec& m);
ModelSpec model_from_json(const Json& j);

// Bounds are written out; on reading they are derived from the model unless the "bounds" object is present.
Json to_json(const ClaimSpec& c);
ClaimSpec claim_from_json(const Json& j, const ModelSpec& model);

Json to_json(const AxisSpec& a);
AxisSpec axis_from_json(const Json& j);

// Full scenario document: schema_version, name, model, claim, variant, axis, s0, k0.
// The oracle is not serialized; it is restored only when the name matches a shipped scenario and
// the model and claim are unchanged.
Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);

Json parse_json_file(const std::string& path);

}  // namespace rdsys
