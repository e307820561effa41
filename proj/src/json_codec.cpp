#include "hydrad/json_codec.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hydrad/error.hpp"

namespace hydrad {

using nlohmann::json;

double round_to_tenth(double value)
{
  return std::round(value * 10.0) / 10.0;
}

namespace {

json optional_percent(const std::optional<double>& pct)
{
  return pct ? json(round_to_tenth(*pct)) : json(nullptr);
}

}  // namespace

}  // namespace hydrad

namespace hydrad::control {

void to_json(json& out, const MoistureReading& reading)
{
  out = json{
    { "raw", reading.raw },
    { "voltage", reading.voltage },
    { "percent", optional_percent(reading.percent) },
    { "channel", reading.channel },
    { "at", format_iso8601(reading.at) },
  };
}

void to_json(json& out, const WateringEvent& event)
{
  out = json{
    { "duration_s", event.duration_s },
    { "volume_l", event.volume_l },
    { "moisture_before", optional_percent(event.moisture_before) },
    { "moisture_after", optional_percent(event.moisture_after) },
    { "at", format_iso8601(event.at) },
  };
}

void to_json(json& out, const WateringSession& session)
{
  out = json{
    { "trigger", to_string(session.trigger) },
    { "started_at", format_iso8601(session.started_at) },
    { "finished_at", session.finished_at ? json(format_iso8601(*session.finished_at)) : json(nullptr) },
    { "cycles", session.cycles },
    { "total_volume_l", session.total_volume_l() },
  };
}

void to_json(json& out, const SystemStatus& status)
{
  auto opt_string = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  out = json{
    { "state", to_string(status.state) },
    { "calibrated", status.calibrated },
    { "busy", status.busy },
    { "last_reading", status.last_reading ? json(*status.last_reading) : json(nullptr) },
    { "next_check_at", format_iso8601(status.next_check_at) },
    { "active_session", status.active_session ? json(*status.active_session) : json(nullptr) },
    { "last_session", status.last_session ? json(*status.last_session) : json(nullptr) },
    { "alarm_reason", opt_string(status.alarm_reason) },
    { "last_error", opt_string(status.last_error) },
    { "degraded", status.degraded_reason.has_value() },
    { "degraded_reason", opt_string(status.degraded_reason) },
    { "checks_run", status.checks_run },
  };
}

void to_json(json& out, const ControllerConfig& config)
{
  out = json{
    { "threshold_pct", config.threshold_pct },
    { "check_interval_s", config.check_interval_s },
    { "base_duration_s", config.base_duration_s },
    { "gain_s_per_pct", config.gain_s_per_pct },
    { "settle_delay_s", config.settle_delay_s },
    { "max_cycles", config.max_cycles },
    { "max_pump_on_s", config.max_pump_on_s },
    { "target_margin_pct", config.target_margin_pct },
  };
}

namespace {

double number_field(const json& value, const std::string& name)
{
  if (!value.is_number()) {
    throw ConfigError(name, "expected a number");
  }
  double const v = value.get<double>();
  if (!std::isfinite(v)) {
    throw ConfigError(name, "must be finite");
  }
  return v;
}

int integer_field(const json& value, const std::string& name)
{
  if (value.is_number_integer()) {
    return value.get<int>();
  }
  if (value.is_number_float()) {
    double const v = value.get<double>();
    if (std::floor(v) == v && std::abs(v) < 1e9) {
      return static_cast<int>(v);
    }
  }
  throw ConfigError(name, "expected an integer");
}

}  // namespace

ControllerConfig merge_config(const ControllerConfig& base, const json& doc)
{
  if (!doc.is_object()) {
    throw ConfigError("controller", "expected a JSON object");
  }
  ControllerConfig next = base;
  for (auto const& [key, value] : doc.items()) {
    if (key == "threshold_pct") {
      next.threshold_pct = number_field(value, key);
    } else if (key == "check_interval_s") {
      next.check_interval_s = number_field(value, key);
    } else if (key == "base_duration_s") {
      next.base_duration_s = number_field(value, key);
    } else if (key == "gain_s_per_pct") {
      next.gain_s_per_pct = number_field(value, key);
    } else if (key == "settle_delay_s") {
      next.settle_delay_s = number_field(value, key);
    } else if (key == "max_cycles") {
      next.max_cycles = integer_field(value, key);
    } else if (key == "max_pump_on_s") {
      next.max_pump_on_s = number_field(value, key);
    } else if (key == "target_margin_pct") {
      next.target_margin_pct = number_field(value, key);
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  next.validate();
  return next;
}

}  // namespace hydrad::control

namespace hydrad::calibration {

void to_json(json& out, const CalibrationProfile& profile)
{
  out = json{
    { "version", profile_version },
    { "raw_dry", profile.raw_dry },
    { "raw_wet", profile.raw_wet },
    { "created_at", format_iso8601(profile.created_at) },
    { "label", profile.label },
  };
}

}  // namespace hydrad::calibration
