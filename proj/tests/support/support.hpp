#pragma once

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "hydrad/calibration.hpp"
#include "hydrad/clock.hpp"
#include "hydrad/controller.hpp"
#include "hydrad/history_store.hpp"
#include "hydrad/simulated_bus.hpp"

namespace hydrad::testing {

/// Scratch directory removed on destruction.
class TempDir
{
public:
  TempDir()
  {
    std::string pattern = (std::filesystem::temp_directory_path() / "hydrad-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) {
      throw std::runtime_error("mkdtemp failed");
    }
    path_ = pattern;
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline device::SimulationParams quiet_params(double theta = 0.5)
{
  device::SimulationParams p;
  p.noise_sigma_v = 0.0;
  p.initial_theta = theta;
  return p;
}

/// The profile a noise-free default rig produces: quantize(2.8 V), quantize(1.2 V).
inline calibration::CalibrationProfile default_profile()
{
  return { 22400, 9600, simulation_epoch(), "test" };
}

/// Virtual clock, simulated bus, history file and controller wired together.
struct Rig
{
  explicit Rig(device::SimulationParams params = quiet_params(),
               control::ControllerConfig config = {},
               VirtualClock::Mode mode = VirtualClock::Mode::auto_advance,
               bool calibrated = true)
    : clock(simulation_epoch(), mode, std::chrono::milliseconds{ 50 })
    , bus(params, clock)
    , history(dir / "history.jsonl", history::HistoryOptions{ 10u * 1024u * 1024u, 5, false })
  {
    control::DeviceSetup setup{ bus, bus, &bus, device::AdcConfig{}, params.pump };
    controller = std::make_unique<control::Controller>(config, clock, setup, &history);
    if (calibrated) {
      controller->set_profile(default_profile());
    }
  }

  TempDir dir;
  VirtualClock clock;
  device::SimulatedBus bus;
  history::HistoryStore history;
  std::unique_ptr<control::Controller> controller;
};

/// theta that reads as `percent` under linear mixing, where n(theta) = theta.
inline double theta_for_percent(double percent)
{
  return percent / 100.0;
}

}  // namespace hydrad::testing
