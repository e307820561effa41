#pragma once

#include "hydrad/time.hpp"

namespace hydrad::soil {

/// Ground truth of the simulated pot.
struct PotState
{
  double theta = 0.5;            ///< volumetric water fraction, [0, 1]
  double capacity_liters = 1.0;  ///< water volume that takes theta from 0 to 1
  Timestamp last_update{};

  void validate() const;
};

struct SoilDynamics
{
  double decay_rate = 2e-6;        ///< fraction of current content lost per second
  double absorb_efficiency = 0.9;  ///< share of pumped water retained, (0, 1]

  void validate() const;
};

/// Advances the pot by `dt_s` seconds, then adds `water_in_l` liters:
///   theta' = clamp01(theta * exp(-decay_rate * dt) + absorb * water_in / capacity)
///
/// Throws DomainError for negative dt or water.
PotState step(const PotState& state, const SoilDynamics& dynamics, double dt_s, double water_in_l);

}  // namespace hydrad::soil
