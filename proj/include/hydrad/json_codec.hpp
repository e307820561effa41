#pragma once

#include <json.hpp>

#include "hydrad/calibration.hpp"
#include "hydrad/controller.hpp"

namespace hydrad {

/// Percent values leave the process at 0.1 % resolution.
double round_to_tenth(double value);

}  // namespace hydrad

namespace hydrad::control {

void to_json(nlohmann::json& out, const MoistureReading& reading);
void to_json(nlohmann::json& out, const WateringEvent& event);
void to_json(nlohmann::json& out, const WateringSession& session);
void to_json(nlohmann::json& out, const SystemStatus& status);
void to_json(nlohmann::json& out, const ControllerConfig& config);

/// Overlays the fields present in `doc` on `base` and validates the result.
/// Unknown keys, wrong types and invariant violations throw ConfigError
/// naming the field; `base` is never partially modified.
ControllerConfig merge_config(const ControllerConfig& base, const nlohmann::json& doc);

}  // namespace hydrad::control

namespace hydrad::calibration {

void to_json(nlohmann::json& out, const CalibrationProfile& profile);

}  // namespace hydrad::calibration
