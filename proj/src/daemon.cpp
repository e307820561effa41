#include "hydrad/daemon.hpp"

#include <spdlog/spdlog.h>

#include "hydrad/error.hpp"

namespace hydrad {

namespace fs = std::filesystem;

DeviceRig::DeviceRig(const DaemonConfig& config, Clock* clock, std::optional<Timestamp> epoch)
  : config_(config)
{
  if (config_.backend == Backend::hardware) {
    throw DeviceError("hardware backend is not available in this build; use device.backend = \"simulated\"");
  }
  if (clock) {
    clock_ = clock;
  } else {
    auto const start = epoch.value_or(std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()));
    owned_clock_ = std::make_unique<ScaledClock>(config_.time_scale, start);
    clock_ = owned_clock_.get();
  }
  bus_ = std::make_unique<device::SimulatedBus>(config_.simulation, *clock_);
}

control::DeviceSetup DeviceRig::setup()
{
  return control::DeviceSetup{ *bus_, *bus_, bus_.get(), config_.adc, config_.simulation.pump };
}

std::optional<calibration::CalibrationProfile> load_startup_profile(const fs::path& path)
{
  std::error_code ec;
  if (path.empty() || !fs::exists(path, ec)) {
    spdlog::info("calibration: no profile at '{}', starting uncalibrated", path.string());
    return std::nullopt;
  }
  try {
    auto profile = calibration::load_profile(path);
    spdlog::info("calibration: loaded '{}' raw_dry={} raw_wet={}", path.string(), profile.raw_dry, profile.raw_wet);
    return profile;
  } catch (const Error& e) {
    spdlog::warn("calibration: ignoring '{}': {}", path.string(), e.what());
    return std::nullopt;
  }
}

Daemon::Daemon(DaemonConfig config, std::optional<fs::path> config_path, Clock* clock)
  : config_(std::move(config))
{
  if (config_path) {
    config_file_ = std::make_unique<ConfigFile>(*config_path, config_);
  }
  history_ = std::make_unique<history::HistoryStore>(
    config_.storage.history_path,
    history::HistoryOptions{ config_.storage.rotate_bytes, config_.storage.keep_files, config_.storage.fsync });
  if (history_->quarantined_bytes() > 0) {
    spdlog::warn("history: quarantined {} bytes of a torn record", history_->quarantined_bytes());
  }

  // A restarted scaled clock must not run behind records already on disk.
  std::optional<Timestamp> epoch;
  if (!clock) {
    auto const wall = std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
    auto const last = history_->last_timestamp();
    epoch = last && *last > wall ? *last : wall;
  }
  rig_ = std::make_unique<DeviceRig>(config_, clock, epoch);

  controller_ = std::make_unique<control::Controller>(config_.controller, rig_->clock(), rig_->setup(), history_.get());
  controller_->set_profile(load_startup_profile(config_.calibration.profile_path));

  api_ = std::make_unique<api::ApiService>(api::ApiContext{ *controller_,
                                                            *history_,
                                                            rig_->clock(),
                                                            config_file_.get(),
                                                            config_.calibration.profile_path,
                                                            config_.calibration.label,
                                                            config_.calibration.n_samples });
}

Daemon::~Daemon()
{
  stop();
}

int Daemon::start(bool run_monitor)
{
  if (run_monitor) {
    monitor_ = std::jthread([this](std::stop_token stop) { controller_->monitor_loop(stop); });
  }
  http_ = std::make_unique<api::HttpServer>(*api_, config_.server.static_dir);
  int const port = http_->start(config_.server.bind, config_.server.port);
  spdlog::info("http: listening on {}:{}", config_.server.bind, port);
  return port;
}

void Daemon::stop()
{
  if (stopped_) {
    return;
  }
  stopped_ = true;
  if (http_) {
    http_->stop();
  }
  controller_->request_stop();
  if (monitor_.joinable()) {
    monitor_.request_stop();
    monitor_.join();
  }
  api_->shutdown();
  try {
    rig_->bus().set_relay(false);
  } catch (const std::exception& e) {
    spdlog::error("relay: failed to de-energize on shutdown: {}", e.what());
  }
  spdlog::info("daemon: stopped, relay off");
}

}  // namespace hydrad
