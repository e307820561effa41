#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace hydrad {

using Duration = std::chrono::microseconds;
using Timestamp = std::chrono::sys_time<Duration>;

/// Seconds as a double, the unit every API payload uses for durations.
constexpr double to_seconds(Duration d)
{
  return std::chrono::duration<double>(d).count();
}

/// Nearest representable duration. Throws DomainError for non-finite input.
Duration from_seconds(double seconds);

/// "YYYY-MM-DDTHH:MM:SS.ffffffZ", always UTC with microseconds.
std::string format_iso8601(Timestamp ts);

/// Accepts the format above; the fractional part may have 0 to 6 digits.
/// Throws DomainError on anything else.
Timestamp parse_iso8601(std::string_view text);

/// 2025-01-01T00:00:00Z, the starting instant of every virtual clock.
Timestamp simulation_epoch();

}  // namespace hydrad
