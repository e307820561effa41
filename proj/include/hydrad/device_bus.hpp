#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "hydrad/time.hpp"

namespace hydrad::device {

using AdcCode = std::int16_t;

enum class AdcMode
{
  single_shot,
  continuous
};

/// Programmable-gain full-scale ranges of the 16-bit converter, volts.
inline constexpr double pga_full_scales[] = { 6.144, 4.096, 2.048, 1.024, 0.512, 0.256 };

/// Selectable data rates, samples per second.
inline constexpr int data_rates[] = { 8, 16, 32, 64, 128, 250, 475, 860 };

struct AdcConfig
{
  double pga_full_scale = 4.096;
  int mux_channel = 0;
  AdcMode mode = AdcMode::single_shot;
  int data_rate = 860;

  /// Throws DomainError naming the invalid field.
  void validate() const;
};

/// One conversion result.
struct AdcSample
{
  AdcCode code = 0;
  double voltage = 0.0;  ///< code * full_scale / 32768
  int channel = 0;
  Timestamp timestamp{};
};

/// round(voltage * 32768 / full_scale), saturated to the int16 range.
AdcCode quantize(double voltage, const AdcConfig& config);

/// code * full_scale / 32768.
double dequantize(AdcCode code, const AdcConfig& config);

/// Volts per code step.
double lsb(const AdcConfig& config);

/// Single-shot conversion time, 1 / data_rate.
Duration conversion_time(const AdcConfig& config);

std::string_view to_string(AdcMode mode);
AdcMode adc_mode_from_string(std::string_view text);

struct RelayState
{
  bool energized = false;
  Timestamp since{};
};

struct PumpModel
{
  double flow_rate_lps = 0.005;

  void validate() const;
};

/// Analog front end as seen by the controller.
class AdcDriver
{
public:
  virtual ~AdcDriver() = default;

  /// Throws DeviceError for an invalid request, BusError when the backend
  /// is unreachable.
  virtual AdcSample read_single_shot(int channel, const AdcConfig& config) = 0;
};

/// Relay line driving the pump.
class RelayDriver
{
public:
  virtual ~RelayDriver() = default;

  /// Idempotent; a repeated request does not record a new transition.
  virtual RelayState set_relay(bool on) = 0;
  virtual RelayState relay_state() const = 0;
};

enum class ReferenceKind
{
  dry,
  wet
};

std::string_view to_string(ReferenceKind kind);
ReferenceKind reference_kind_from_string(std::string_view text);

/// Hook run around a calibration capture. A hardware backend leaves this to
/// the operator; the simulation swaps the probe into a reference medium.
class ReferenceFixture
{
public:
  virtual ~ReferenceFixture() = default;

  /// `kind` set: probe goes into that medium. nullopt: back into the pot.
  virtual void place_probe(std::optional<ReferenceKind> kind) = 0;
};

}  // namespace hydrad::device
