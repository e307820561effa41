#include "hydrad/soil_simulator.hpp"

#include <algorithm>
#include <cmath>

#include "hydrad/error.hpp"

namespace hydrad::soil {

void PotState::validate() const
{
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError("pot theta outside [0, 1]");
  }
  if (!(capacity_liters > 0.0)) {
    throw DomainError("pot capacity must be positive");
  }
}

void SoilDynamics::validate() const
{
  if (!(decay_rate >= 0.0)) {
    throw DomainError("decay_rate must be non-negative");
  }
  if (!(absorb_efficiency > 0.0 && absorb_efficiency <= 1.0)) {
    throw DomainError("absorb_efficiency must be in (0, 1]");
  }
}

PotState step(const PotState& state, const SoilDynamics& dynamics, double dt_s, double water_in_l)
{
  if (!(dt_s >= 0.0)) {
    throw DomainError("step dt must be non-negative");
  }
  if (!(water_in_l >= 0.0)) {
    throw DomainError("water input must be non-negative");
  }
  PotState next = state;
  double const decayed = state.theta * std::exp(-dynamics.decay_rate * dt_s);
  next.theta = std::clamp(decayed + dynamics.absorb_efficiency * water_in_l / state.capacity_liters, 0.0, 1.0);
  next.last_update = state.last_update + from_seconds(dt_s);
  return next;
}

}  // namespace hydrad::soil
