#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "hydrad/controller.hpp"
#include "hydrad/simulated_bus.hpp"

namespace hydrad {

enum class Backend
{
  simulated,
  hardware
};

struct StorageConfig
{
  std::filesystem::path history_path = "hydrad-history.jsonl";
  std::uintmax_t rotate_bytes = 10u * 1024u * 1024u;
  int keep_files = 5;
  bool fsync = true;
};

struct CalibrationConfig
{
  std::filesystem::path profile_path = "hydrad-profile.json";
  int n_samples = 9;
  std::string label = "default";
};

struct ServerConfig
{
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir = "web";
};

/// Everything the daemon reads from its JSON config file.
struct DaemonConfig
{
  Backend backend = Backend::simulated;
  device::AdcConfig adc{};
  device::SimulationParams simulation{};
  physics::ProbeGeometry probe{};
  double time_scale = 1.0;
  control::ControllerConfig controller{};
  CalibrationConfig calibration{};
  StorageConfig storage{};
  ServerConfig server{};
};

/// Parses a config document; absent keys keep their defaults. Relative
/// paths are resolved against `base_dir`. Throws ConfigError with a dotted
/// field name such as "controller.threshold_pct".
DaemonConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Every field written out explicitly.
nlohmann::json config_to_json(const DaemonConfig& config);

/// Throws ConfigError("config", ...) when the file is missing or not JSON.
DaemonConfig load_config(const std::filesystem::path& path);

/// The config file backing a running daemon; PUT /api/config writes here.
class ConfigFile
{
public:
  ConfigFile(std::filesystem::path path, DaemonConfig config);

  DaemonConfig current() const;
  const std::filesystem::path& path() const { return path_; }

  /// Rewrites the file with the new controller section. Throws
  /// StorageError and leaves the old content in place on failure.
  void store_controller(const control::ControllerConfig& controller);

private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  DaemonConfig config_;
  nlohmann::json document_;
};

}  // namespace hydrad
