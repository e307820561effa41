#include "hydrad/time.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "hydrad/error.hpp"

namespace hydrad {

using namespace std::chrono;

Duration from_seconds(double seconds)
{
  if (!std::isfinite(seconds)) {
    throw DomainError("duration must be finite");
  }
  return round<Duration>(duration<double>(seconds));
}

std::string format_iso8601(Timestamp ts)
{
  auto const day = floor<days>(ts);
  year_month_day const ymd{ day };
  hh_mm_ss<Duration> const hms{ ts - day };
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:06d}Z",
                     static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()),
                     hms.hours().count(),
                     hms.minutes().count(),
                     hms.seconds().count(),
                     hms.subseconds().count());
}

namespace {

int take_digits(std::string_view& text, std::size_t count, std::string_view original)
{
  int value = 0;
  if (text.size() < count) {
    throw DomainError(fmt::format("invalid timestamp '{}'", original));
  }
  auto const* first = text.data();
  auto const [ptr, ec] = std::from_chars(first, first + count, value);
  if (ec != std::errc{} || ptr != first + count) {
    throw DomainError(fmt::format("invalid timestamp '{}'", original));
  }
  text.remove_prefix(count);
  return value;
}

void expect(std::string_view& text, char c, std::string_view original)
{
  if (text.empty() || text.front() != c) {
    throw DomainError(fmt::format("invalid timestamp '{}'", original));
  }
  text.remove_prefix(1);
}

}  // namespace

Timestamp parse_iso8601(std::string_view const original)
{
  auto text = original;
  int const y = take_digits(text, 4, original);
  expect(text, '-', original);
  int const mo = take_digits(text, 2, original);
  expect(text, '-', original);
  int const d = take_digits(text, 2, original);
  expect(text, 'T', original);
  int const h = take_digits(text, 2, original);
  expect(text, ':', original);
  int const mi = take_digits(text, 2, original);
  expect(text, ':', original);
  int const s = take_digits(text, 2, original);

  long micros = 0;
  if (!text.empty() && text.front() == '.') {
    text.remove_prefix(1);
    int digits = 0;
    while (!text.empty() && text.front() >= '0' && text.front() <= '9') {
      if (digits == 6) {
        throw DomainError(fmt::format("invalid timestamp '{}': more than 6 fractional digits", original));
      }
      micros = micros * 10 + (text.front() - '0');
      ++digits;
      text.remove_prefix(1);
    }
    if (digits == 0) {
      throw DomainError(fmt::format("invalid timestamp '{}'", original));
    }
    for (; digits < 6; ++digits) {
      micros *= 10;
    }
  }
  expect(text, 'Z', original);
  if (!text.empty()) {
    throw DomainError(fmt::format("invalid timestamp '{}'", original));
  }

  year_month_day const ymd{ year{ y }, month{ static_cast<unsigned>(mo) }, day{ static_cast<unsigned>(d) } };
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw DomainError(fmt::format("invalid timestamp '{}'", original));
  }
  return time_point_cast<Duration>(sys_days{ ymd }) + hours{ h } + minutes{ mi } + seconds{ s } +
         microseconds{ micros };
}

Timestamp simulation_epoch()
{
  return time_point_cast<Duration>(sys_days{ year{ 2025 } / January / 1 });
}

}  // namespace hydrad
