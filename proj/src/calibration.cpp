#include "hydrad/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "hydrad/error.hpp"
#include "hydrad/file_util.hpp"

namespace hydrad::calibration {

using nlohmann::json;

void CalibrationProfile::validate() const
{
  if (raw_dry <= raw_wet) {
    throw InvalidProfileError(
      fmt::format("raw_dry ({}) must be greater than raw_wet ({})", raw_dry, raw_wet));
  }
}

AdcCode median_code(std::span<const AdcCode> samples)
{
  if (samples.empty()) {
    throw DomainError("median of zero samples");
  }
  std::vector<AdcCode> sorted(samples.begin(), samples.end());
  std::ranges::sort(sorted);
  auto const mid = sorted.size() / 2;
  if (sorted.size() % 2 == 1) {
    return sorted[mid];
  }
  double const mean = (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid])) / 2.0;
  return static_cast<AdcCode>(std::round(mean));
}

namespace {

class ProbePlacement
{
public:
  ProbePlacement(device::ReferenceFixture* fixture, ReferenceKind kind)
    : fixture_(fixture)
  {
    if (fixture_) {
      fixture_->place_probe(kind);
    }
  }
  ~ProbePlacement()
  {
    if (fixture_) {
      fixture_->place_probe(std::nullopt);
    }
  }
  ProbePlacement(const ProbePlacement&) = delete;
  ProbePlacement& operator=(const ProbePlacement&) = delete;

private:
  device::ReferenceFixture* fixture_;
};

}  // namespace

AdcCode capture_reference(device::AdcDriver& adc,
                          const device::AdcConfig& config,
                          ReferenceKind kind,
                          int n_samples,
                          device::ReferenceFixture* fixture)
{
  if (n_samples < 1) {
    throw DomainError("n_samples must be at least 1");
  }
  ProbePlacement const placement(fixture, kind);
  std::vector<AdcCode> codes;
  codes.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    codes.push_back(adc.read_single_shot(config.mux_channel, config).code);
  }
  return median_code(codes);
}

double to_percent(AdcCode raw, const CalibrationProfile& profile)
{
  profile.validate();
  double const span = static_cast<double>(profile.raw_dry) - static_cast<double>(profile.raw_wet);
  double const pct = 100.0 * (static_cast<double>(profile.raw_dry) - static_cast<double>(raw)) / span;
  return std::clamp(pct, 0.0, 100.0);
}

std::string serialize_profile(const CalibrationProfile& profile)
{
  json const doc = {
    { "version", profile_version },
    { "raw_dry", profile.raw_dry },
    { "raw_wet", profile.raw_wet },
    { "created_at", format_iso8601(profile.created_at) },
    { "label", profile.label },
  };
  return doc.dump(2) + "\n";
}

namespace {

const json& require(const json& doc, const char* field)
{
  auto const it = doc.find(field);
  if (it == doc.end()) {
    throw ParseError(field, "missing");
  }
  return *it;
}

AdcCode require_code(const json& doc, const char* field)
{
  auto const& value = require(doc, field);
  if (!value.is_number_integer()) {
    throw ParseError(field, "expected an integer ADC code");
  }
  auto const wide = value.get<std::int64_t>();
  if (wide < std::numeric_limits<AdcCode>::min() || wide > std::numeric_limits<AdcCode>::max()) {
    throw ParseError(field, "outside the signed 16-bit range");
  }
  return static_cast<AdcCode>(wide);
}

}  // namespace

CalibrationProfile parse_profile(std::string_view text)
{
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("document", e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("document", "expected a JSON object");
  }

  auto const& version = require(doc, "version");
  if (!version.is_number_integer() || version.get<int>() != profile_version) {
    throw ParseError("version", fmt::format("unsupported (expected {})", profile_version));
  }

  CalibrationProfile profile;
  profile.raw_dry = require_code(doc, "raw_dry");
  profile.raw_wet = require_code(doc, "raw_wet");

  auto const& created = require(doc, "created_at");
  if (!created.is_string()) {
    throw ParseError("created_at", "expected an ISO-8601 string");
  }
  try {
    profile.created_at = parse_iso8601(created.get<std::string>());
  } catch (const DomainError& e) {
    throw ParseError("created_at", e.what());
  }

  auto const& label = require(doc, "label");
  if (!label.is_string()) {
    throw ParseError("label", "expected a string");
  }
  profile.label = label.get<std::string>();

  profile.validate();
  return profile;
}

void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path)
{
  profile.validate();
  write_file_atomic(path, serialize_profile(profile));
}

CalibrationProfile load_profile(const std::filesystem::path& path)
{
  return parse_profile(read_file(path));
}

std::optional<CalibrationProfile> CalibrationWorkflow::record(ReferenceKind kind,
                                                              AdcCode code,
                                                              Timestamp now,
                                                              std::string label)
{
  auto& slot = kind == ReferenceKind::dry ? dry_ : wet_;
  slot = code;
  if (!dry_ || !wet_) {
    return std::nullopt;
  }
  CalibrationProfile profile{ *dry_, *wet_, now, std::move(label) };
  try {
    profile.validate();
  } catch (const InvalidProfileError&) {
    slot.reset();
    throw;
  }
  reset();
  return profile;
}

std::optional<AdcCode> CalibrationWorkflow::pending(ReferenceKind kind) const
{
  return kind == ReferenceKind::dry ? dry_ : wet_;
}

void CalibrationWorkflow::restore(std::optional<AdcCode> dry, std::optional<AdcCode> wet)
{
  dry_ = dry;
  wet_ = wet;
}

void CalibrationWorkflow::reset()
{
  dry_.reset();
  wet_.reset();
}

}  // namespace hydrad::calibration
