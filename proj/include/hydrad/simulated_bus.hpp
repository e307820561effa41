#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "hydrad/clock.hpp"
#include "hydrad/device_bus.hpp"
#include "hydrad/sensor_physics.hpp"
#include "hydrad/soil_simulator.hpp"

namespace hydrad::device {

struct SimulationParams
{
  physics::SoilDielectricModel dielectric{};
  physics::SensorTransfer transfer{};
  soil::SoilDynamics dynamics{};
  PumpModel pump{};
  double capacity_liters = 1.0;
  double initial_theta = 0.5;
  int probe_channel = 0;
  double noise_sigma_v = 0.002;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Simulation backend: one probe on `probe_channel`, one relay, one pump,
/// one pot.
///
/// The pot is integrated lazily up to clock.now() whenever the bus is
/// touched. While the relay is energized the integration sub-steps at one
/// second so pumped water and decay interleave finely; with the relay off a
/// single exact exponential step covers the whole gap.
class SimulatedBus final
  : public AdcDriver
  , public RelayDriver
  , public ReferenceFixture
{
public:
  SimulatedBus(SimulationParams params, Clock& clock);

  AdcSample read_single_shot(int channel, const AdcConfig& config) override;
  RelayState set_relay(bool on) override;
  RelayState relay_state() const override;
  void place_probe(std::optional<ReferenceKind> kind) override;

  /// Pot snapshot integrated to now.
  soil::PotState pot();
  void force_theta(double theta);
  void set_dynamics(const soil::SoilDynamics& dynamics);
  void set_noise_sigma(double sigma_v);

  /// Liters the pump has pushed since construction.
  double delivered_liters();

  /// Every recorded relay transition, oldest first.
  std::vector<RelayState> relay_transitions() const;

  /// Simulates an unplugged bus: reads throw BusError while false.
  void set_available(bool available);

  /// The next `count` reads throw BusError.
  void inject_bus_faults(int count);

  const SimulationParams& params() const { return params_; }

private:
  void advance_locked(Timestamp now);

  SimulationParams params_;
  Clock& clock_;
  mutable std::mutex mutex_;
  soil::PotState pot_;
  RelayState relay_{};
  std::vector<RelayState> transitions_;
  std::optional<ReferenceKind> probe_medium_;
  double delivered_liters_ = 0.0;
  bool available_ = true;
  int pending_faults_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace hydrad::device
