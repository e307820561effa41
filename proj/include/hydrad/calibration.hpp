#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "hydrad/device_bus.hpp"
#include "hydrad/time.hpp"

namespace hydrad::calibration {

using device::AdcCode;
using device::ReferenceKind;

inline constexpr int profile_version = 1;
inline constexpr int default_reference_samples = 9;

/// Two reference codes: raw_dry reads as 0 %, raw_wet as 100 %.
struct CalibrationProfile
{
  AdcCode raw_dry = 0;
  AdcCode raw_wet = 0;
  Timestamp created_at{};
  std::string label;

  /// Throws InvalidProfileError unless raw_dry > raw_wet.
  void validate() const;

  bool operator==(const CalibrationProfile&) const = default;
};

/// Median of the samples; even counts average the two middle codes and
/// round half away from zero. Throws DomainError on an empty span.
AdcCode median_code(std::span<const AdcCode> samples);

/// Median of `n_samples` single-shot reads on config.mux_channel. When a
/// fixture is given the probe sits in the `kind` medium for the duration.
AdcCode capture_reference(device::AdcDriver& adc,
                          const device::AdcConfig& config,
                          ReferenceKind kind,
                          int n_samples,
                          device::ReferenceFixture* fixture = nullptr);

/// clamp(100 * (raw_dry - raw) / (raw_dry - raw_wet), 0, 100).
double to_percent(AdcCode raw, const CalibrationProfile& profile);

std::string serialize_profile(const CalibrationProfile& profile);

/// Throws ParseError naming the field, or InvalidProfileError.
CalibrationProfile parse_profile(std::string_view text);

/// Atomic write-temp-then-rename.
void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

/// Collects a dry and a wet capture, in either order, into a profile.
class CalibrationWorkflow
{
public:
  /// Stores the capture. Once both phases are present, returns the
  /// validated profile and clears the pending pair. A degenerate pair
  /// throws InvalidProfileError and discards the capture just offered, so
  /// the operator can redo that phase.
  std::optional<CalibrationProfile> record(ReferenceKind kind,
                                           AdcCode code,
                                           Timestamp now,
                                           std::string label = "default");

  std::optional<AdcCode> pending(ReferenceKind kind) const;
  void restore(std::optional<AdcCode> dry, std::optional<AdcCode> wet);
  void reset();

private:
  std::optional<AdcCode> dry_;
  std::optional<AdcCode> wet_;
};

}  // namespace hydrad::calibration
