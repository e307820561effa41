#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <thread>

#include "hydrad/api_service.hpp"
#include "hydrad/clock.hpp"
#include "hydrad/config.hpp"
#include "hydrad/controller.hpp"
#include "hydrad/history_store.hpp"
#include "hydrad/simulated_bus.hpp"

namespace hydrad {

/// Clock plus device backend built from a config. Throws DeviceError for
/// the hardware backend, which has no driver in this build.
class DeviceRig
{
public:
  /// `clock` null: a ScaledClock at config.time_scale starting at `epoch`.
  DeviceRig(const DaemonConfig& config, Clock* clock = nullptr, std::optional<Timestamp> epoch = std::nullopt);

  Clock& clock() { return *clock_; }
  device::SimulatedBus& bus() { return *bus_; }
  control::DeviceSetup setup();

private:
  DaemonConfig config_;
  std::unique_ptr<Clock> owned_clock_;
  Clock* clock_ = nullptr;
  std::unique_ptr<device::SimulatedBus> bus_;
};

/// Loads the profile at `path`. A missing file is silent, a corrupt one is
/// logged; both leave the controller uncalibrated.
std::optional<calibration::CalibrationProfile> load_startup_profile(const std::filesystem::path& path);

/// The running service: history, devices, controller, monitor loop, API.
class Daemon
{
public:
  /// `config_path` set: PUT /api/config persists there.
  /// `clock` set: used instead of the config's scaled clock (tests).
  Daemon(DaemonConfig config, std::optional<std::filesystem::path> config_path = std::nullopt, Clock* clock = nullptr);
  ~Daemon();

  Daemon(const Daemon&) = delete;
  Daemon& operator=(const Daemon&) = delete;

  /// Starts the monitor loop and the HTTP server. Returns the bound port.
  int start(bool run_monitor = true);

  /// Idempotent. Interrupts any activity and leaves the relay off.
  void stop();

  control::Controller& controller() { return *controller_; }
  history::HistoryStore& history() { return *history_; }
  device::SimulatedBus& bus() { return rig_->bus(); }
  Clock& clock() { return rig_->clock(); }
  api::ApiService& api() { return *api_; }

private:
  DaemonConfig config_;
  std::unique_ptr<ConfigFile> config_file_;
  std::unique_ptr<history::HistoryStore> history_;
  std::unique_ptr<DeviceRig> rig_;
  std::unique_ptr<control::Controller> controller_;
  std::unique_ptr<api::ApiService> api_;
  std::unique_ptr<api::HttpServer> http_;
  std::jthread monitor_;
  bool stopped_ = false;
};

}  // namespace hydrad
