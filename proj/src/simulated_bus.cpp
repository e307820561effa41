#include "hydrad/simulated_bus.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hydrad/error.hpp"

namespace hydrad::device {

namespace {

constexpr Duration pump_substep = std::chrono::seconds{ 1 };

}  // namespace

void SimulationParams::validate() const
{
  dielectric.validate();
  transfer.validate();
  pump.validate();
  if (!(capacity_liters > 0.0)) {
    throw DomainError("capacity_liters must be positive");
  }
  if (!(initial_theta >= 0.0 && initial_theta <= 1.0)) {
    throw DomainError("initial_theta outside [0, 1]");
  }
  if (probe_channel < 0 || probe_channel > 3) {
    throw DomainError("probe_channel outside 0..3");
  }
  if (!(noise_sigma_v >= 0.0)) {
    throw DomainError("noise_sigma must be non-negative");
  }
  // absorb_efficiency = 0 is accepted here: it is the disconnected-pump rig.
  if (!(dynamics.decay_rate >= 0.0)) {
    throw DomainError("decay_rate must be non-negative");
  }
  if (!(dynamics.absorb_efficiency >= 0.0 && dynamics.absorb_efficiency <= 1.0)) {
    throw DomainError("absorb_efficiency must be in [0, 1]");
  }
}

SimulatedBus::SimulatedBus(SimulationParams params, Clock& clock)
  : params_(std::move(params))
  , clock_(clock)
  , rng_(params_.seed)
{
  params_.validate();
  pot_.theta = params_.initial_theta;
  pot_.capacity_liters = params_.capacity_liters;
  pot_.last_update = clock_.now();
  relay_.since = pot_.last_update;
}

void SimulatedBus::advance_locked(Timestamp now)
{
  if (now <= pot_.last_update) {
    return;
  }
  if (!relay_.energized) {
    double const dt = to_seconds(now - pot_.last_update);
    auto next = soil::step(pot_, params_.dynamics, dt, 0.0);
    next.last_update = now;
    pot_ = next;
    return;
  }
  while (pot_.last_update < now) {
    auto const slice = std::min(pump_substep, now - pot_.last_update);
    double const dt = to_seconds(slice);
    double const water = params_.pump.flow_rate_lps * dt;
    auto next = soil::step(pot_, params_.dynamics, dt, water);
    next.last_update = pot_.last_update + slice;
    pot_ = next;
    delivered_liters_ += water;
  }
}

AdcSample SimulatedBus::read_single_shot(int channel, const AdcConfig& config)
{
  if (channel < 0 || channel > 3) {
    throw DeviceError(fmt::format("ADC channel {} does not exist (0..3)", channel));
  }
  try {
    config.validate();
  } catch (const DomainError& e) {
    throw DeviceError(fmt::format("invalid ADC configuration: {}", e.what()));
  }
  if (config.mode != AdcMode::single_shot) {
    throw DeviceError("continuous conversion mode is unsupported");
  }
  {
    std::lock_guard lock(mutex_);
    if (!available_) {
      throw BusError("ADC bus unavailable");
    }
    if (pending_faults_ > 0) {
      --pending_faults_;
      throw BusError("ADC bus transaction failed");
    }
  }

  clock_.sleep_for(conversion_time(config));

  std::lock_guard lock(mutex_);
  auto const now = clock_.now();
  advance_locked(now);

  double volts = 0.0;
  if (channel == params_.probe_channel) {
    double theta = pot_.theta;
    if (probe_medium_) {
      theta = *probe_medium_ == ReferenceKind::dry ? 0.0 : 1.0;
    }
    volts = physics::sensor_voltage(theta, params_.dielectric, params_.transfer);
    if (params_.noise_sigma_v > 0.0) {
      std::normal_distribution<double> noise(0.0, params_.noise_sigma_v);
      volts += noise(rng_);
    }
  }

  AdcSample sample;
  sample.code = quantize(volts, config);
  sample.voltage = dequantize(sample.code, config);
  sample.channel = channel;
  sample.timestamp = now;
  return sample;
}

RelayState SimulatedBus::set_relay(bool on)
{
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  if (relay_.energized != on) {
    relay_.energized = on;
    relay_.since = std::max(clock_.now(), relay_.since);
    transitions_.push_back(relay_);
  }
  return relay_;
}

RelayState SimulatedBus::relay_state() const
{
  std::lock_guard lock(mutex_);
  return relay_;
}

void SimulatedBus::place_probe(std::optional<ReferenceKind> kind)
{
  std::lock_guard lock(mutex_);
  probe_medium_ = kind;
}

soil::PotState SimulatedBus::pot()
{
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  return pot_;
}

void SimulatedBus::force_theta(double theta)
{
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError("theta outside [0, 1]");
  }
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  pot_.theta = theta;
}

void SimulatedBus::set_dynamics(const soil::SoilDynamics& dynamics)
{
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  params_.dynamics = dynamics;
}

void SimulatedBus::set_noise_sigma(double sigma_v)
{
  if (!(sigma_v >= 0.0)) {
    throw DomainError("noise sigma must be non-negative");
  }
  std::lock_guard lock(mutex_);
  params_.noise_sigma_v = sigma_v;
}

double SimulatedBus::delivered_liters()
{
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  return delivered_liters_;
}

std::vector<RelayState> SimulatedBus::relay_transitions() const
{
  std::lock_guard lock(mutex_);
  return transitions_;
}

void SimulatedBus::set_available(bool available)
{
  std::lock_guard lock(mutex_);
  available_ = available;
}

void SimulatedBus::inject_bus_faults(int count)
{
  std::lock_guard lock(mutex_);
  pending_faults_ = std::max(0, count);
}

}  // namespace hydrad::device
