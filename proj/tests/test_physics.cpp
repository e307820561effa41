#include <doctest.h>

#include <random>

#include "hydrad/error.hpp"
#include "hydrad/sensor_physics.hpp"

using namespace hydrad;
using namespace hydrad::physics;

TEST_CASE("effective permittivity mixes linearly")
{
  SoilDielectricModel const m{ 3.0, 80.0 };
  CHECK(effective_permittivity(0.0, m) == 3.0);
  CHECK(effective_permittivity(1.0, m) == 80.0);
  CHECK(effective_permittivity(0.5, m) == doctest::Approx(41.5).epsilon(1e-15));
  CHECK_THROWS_AS(effective_permittivity(-0.01, m), DomainError);
  CHECK_THROWS_AS(effective_permittivity(1.01, m), DomainError);
}

TEST_CASE("capacitance of the parallel-plate probe")
{
  ProbeGeometry const g{ 1e-4, 1e-3 };
  CHECK(capacitance(1.0, g) == doctest::Approx(8.854e-13).epsilon(1e-12));
  CHECK(capacitance(80.0, g) == doctest::Approx(7.0832e-11).epsilon(1e-12));
  CHECK(capacitance(80.0, g) / capacitance(2.0, g) == doctest::Approx(40.0).epsilon(1e-12));

  CHECK_THROWS_AS(capacitance(0.5, g), DomainError);
  CHECK_THROWS_AS(capacitance(3.0, ProbeGeometry{ 0.0, 1e-3 }), DomainError);
  CHECK_THROWS_AS(capacitance(3.0, ProbeGeometry{ 1e-4, -1e-3 }), DomainError);
}

TEST_CASE("sensor voltage endpoints and midpoint")
{
  SoilDielectricModel const m{};
  SensorTransfer const t{ 2.8, 1.2 };
  CHECK(sensor_voltage(0.0, m, t) == doctest::Approx(2.8).epsilon(1e-15));
  CHECK(sensor_voltage(1.0, m, t) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(sensor_voltage(0.5, m, t) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("invalid models are rejected")
{
  CHECK_THROWS_AS((SoilDielectricModel{ 80.0, 3.0 }).validate(), DomainError);
  CHECK_THROWS_AS((SoilDielectricModel{ 0.5, 80.0 }).validate(), DomainError);
  CHECK_THROWS_AS((SensorTransfer{ 1.0, 2.0 }).validate(), DomainError);
}

TEST_CASE("property: capacitance is linear in eps_r and area, inverse in gap")
{
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> eps(1.0, 100.0);
  std::uniform_real_distribution<double> scale(1.0, 10.0);
  std::uniform_real_distribution<double> area(1e-6, 1e-2);
  std::uniform_real_distribution<double> gap(1e-5, 1e-2);
  for (int i = 0; i < 2000; ++i) {
    ProbeGeometry const g{ area(rng), gap(rng) };
    double const e = eps(rng);
    double const k = scale(rng);
    double const c = capacitance(e, g);
    CHECK(capacitance(k * e, g) == doctest::Approx(k * c).epsilon(1e-12));
    CHECK(capacitance(e, ProbeGeometry{ k * g.plate_area_m2, g.plate_gap_m }) == doctest::Approx(k * c).epsilon(1e-12));
    CHECK(capacitance(e, ProbeGeometry{ g.plate_area_m2, k * g.plate_gap_m }) == doctest::Approx(c / k).epsilon(1e-12));
  }
}

TEST_CASE("property: voltage decreases strictly and stays between the rails")
{
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> eps_dry(1.0, 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    SoilDielectricModel const m{ eps_dry(rng), 80.0 };
    SensorTransfer const t{ 2.8, 1.2 };
    double a = unit(rng);
    double b = unit(rng);
    if (a == b) {
      continue;
    }
    if (a > b) {
      std::swap(a, b);
    }
    double const va = sensor_voltage(a, m, t);
    double const vb = sensor_voltage(b, m, t);
    CHECK(va > vb);
    CHECK(va <= t.v_dry);
    CHECK(vb >= t.v_wet);
  }
}

TEST_CASE("property: wetter soil means more capacitance")
{
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> area(1e-6, 1e-2);
  std::uniform_real_distribution<double> gap(1e-5, 1e-2);
  SoilDielectricModel const m{};
  for (int i = 0; i < 1000; ++i) {
    ProbeGeometry const g{ area(rng), gap(rng) };
    double const lo = unit(rng) * 0.5;
    double const hi = lo + 0.01 + unit(rng) * 0.49;
    CHECK(capacitance(effective_permittivity(hi, m), g) > capacitance(effective_permittivity(lo, m), g));
  }
}
