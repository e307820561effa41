#include "hydrad/device_bus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hydrad/error.hpp"

namespace hydrad::device {

namespace {

constexpr double code_span = 32768.0;

}  // namespace

void AdcConfig::validate() const
{
  if (std::ranges::find(pga_full_scales, pga_full_scale) == std::end(pga_full_scales)) {
    throw DomainError(fmt::format("pga_full_scale {} is not a supported range", pga_full_scale));
  }
  if (mux_channel < 0 || mux_channel > 3) {
    throw DomainError(fmt::format("mux_channel {} outside 0..3", mux_channel));
  }
  if (std::ranges::find(data_rates, data_rate) == std::end(data_rates)) {
    throw DomainError(fmt::format("data_rate {} is not a supported rate", data_rate));
  }
}

AdcCode quantize(double voltage, const AdcConfig& config)
{
  if (std::isnan(voltage)) {
    throw DomainError("cannot quantize NaN");
  }
  double const scaled = std::round(voltage * code_span / config.pga_full_scale);
  double const clamped = std::clamp(scaled,
                                    static_cast<double>(std::numeric_limits<AdcCode>::min()),
                                    static_cast<double>(std::numeric_limits<AdcCode>::max()));
  return static_cast<AdcCode>(clamped);
}

double dequantize(AdcCode code, const AdcConfig& config)
{
  return static_cast<double>(code) * config.pga_full_scale / code_span;
}

double lsb(const AdcConfig& config)
{
  return config.pga_full_scale / code_span;
}

Duration conversion_time(const AdcConfig& config)
{
  return from_seconds(1.0 / static_cast<double>(config.data_rate));
}

std::string_view to_string(AdcMode mode)
{
  return mode == AdcMode::single_shot ? "single_shot" : "continuous";
}

AdcMode adc_mode_from_string(std::string_view text)
{
  if (text == "single_shot") {
    return AdcMode::single_shot;
  }
  if (text == "continuous") {
    return AdcMode::continuous;
  }
  throw DomainError(fmt::format("unknown ADC mode '{}'", text));
}

void PumpModel::validate() const
{
  if (!(flow_rate_lps > 0.0)) {
    throw DomainError("flow_rate must be positive");
  }
}

std::string_view to_string(ReferenceKind kind)
{
  return kind == ReferenceKind::dry ? "dry" : "wet";
}

ReferenceKind reference_kind_from_string(std::string_view text)
{
  if (text == "dry") {
    return ReferenceKind::dry;
  }
  if (text == "wet") {
    return ReferenceKind::wet;
  }
  throw DomainError(fmt::format("phase must be 'dry' or 'wet', got '{}'", text));
}

}  // namespace hydrad::device
