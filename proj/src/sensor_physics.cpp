#include "hydrad/sensor_physics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hydrad/error.hpp"

namespace hydrad::physics {

namespace {

void require_fraction(double theta)
{
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError(fmt::format("water fraction {} outside [0, 1]", theta));
  }
}

}  // namespace

void ProbeGeometry::validate() const
{
  if (!(plate_area_m2 > 0.0) || !std::isfinite(plate_area_m2)) {
    throw DomainError("plate_area must be positive");
  }
  if (!(plate_gap_m > 0.0) || !std::isfinite(plate_gap_m)) {
    throw DomainError("plate_gap must be positive");
  }
}

void SoilDielectricModel::validate() const
{
  if (!(eps_dry >= 1.0)) {
    throw DomainError("eps_dry must be at least 1");
  }
  if (!(eps_water > eps_dry)) {
    throw DomainError("eps_water must exceed eps_dry");
  }
  if (!(eps0 > 0.0)) {
    throw DomainError("eps0 must be positive");
  }
}

void SensorTransfer::validate() const
{
  if (!(v_wet >= 0.0)) {
    throw DomainError("v_wet must be non-negative");
  }
  if (!(v_dry > v_wet)) {
    throw DomainError("v_dry must exceed v_wet");
  }
}

double effective_permittivity(double theta, const SoilDielectricModel& model)
{
  require_fraction(theta);
  return model.eps_dry + (model.eps_water - model.eps_dry) * theta;
}

double capacitance(double eps_r, const ProbeGeometry& geometry)
{
  if (!(eps_r >= 1.0)) {
    throw DomainError(fmt::format("relative permittivity {} below 1", eps_r));
  }
  geometry.validate();
  return eps_r * vacuum_permittivity * geometry.plate_area_m2 / geometry.plate_gap_m;
}

double normalized_response(double theta, const SoilDielectricModel& model)
{
  return (effective_permittivity(theta, model) - model.eps_dry) / (model.eps_water - model.eps_dry);
}

double sensor_voltage(double theta, const SoilDielectricModel& model, const SensorTransfer& transfer)
{
  return transfer.v_dry - (transfer.v_dry - transfer.v_wet) * normalized_response(theta, model);
}

}  // namespace hydrad::physics
