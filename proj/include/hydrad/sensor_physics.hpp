#pragma once

namespace hydrad::physics {

/// Permittivity of free space, F/m.
inline constexpr double vacuum_permittivity = 8.854e-12;

/// Parallel-plate approximation of the probe electrodes.
struct ProbeGeometry
{
  double plate_area_m2 = 1e-4;
  double plate_gap_m = 1e-3;

  void validate() const;
};

/// Relative permittivity of the two soil constituents the probe sees.
struct SoilDielectricModel
{
  double eps_dry = 3.0;
  double eps_water = 80.0;
  double eps0 = vacuum_permittivity;

  void validate() const;
};

/// Probe output at the two moisture extremes. Output falls as moisture rises.
struct SensorTransfer
{
  double v_dry = 2.8;
  double v_wet = 1.2;

  void validate() const;
};

/// Linear mix of dry soil and water by volumetric water fraction `theta`.
/// Throws DomainError for theta outside [0, 1].
double effective_permittivity(double theta, const SoilDielectricModel& model);

/// C = eps_r * eps0 * A / d.
/// Throws DomainError for eps_r < 1 or non-positive geometry.
double capacitance(double eps_r, const ProbeGeometry& geometry);

/// Position of eps_eff(theta) between eps_dry (0) and eps_water (1).
double normalized_response(double theta, const SoilDielectricModel& model);

/// Demodulated probe voltage: v_dry - (v_dry - v_wet) * normalized_response.
double sensor_voltage(double theta, const SoilDielectricModel& model, const SensorTransfer& transfer);

}  // namespace hydrad::physics
