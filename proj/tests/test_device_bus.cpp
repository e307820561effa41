#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>

#include "hydrad/error.hpp"
#include "hydrad/simulated_bus.hpp"
#include "support.hpp"

using namespace hydrad;
using namespace hydrad::device;
using hydrad::testing::quiet_params;

namespace {

/// round(uV * 32768 / FS_uV) in exact integer arithmetic, half away from zero.
std::int64_t rational_code(std::int64_t microvolts, std::int64_t fs_microvolts)
{
  std::int64_t const num = microvolts * 32768;
  std::int64_t const q = (2 * std::llabs(num) + fs_microvolts) / (2 * fs_microvolts);
  std::int64_t const code = num < 0 ? -q : q;
  return std::clamp<std::int64_t>(code, -32768, 32767);
}

}  // namespace

TEST_CASE("quantize examples")
{
  AdcConfig const c{};
  CHECK(quantize(0.0, c) == 0);
  CHECK(quantize(2.048, c) == 16384);
  CHECK(quantize(5.0, c) == 32767);
  CHECK(quantize(-5.0, c) == -32768);
  CHECK(quantize(2.8, c) == 22400);
  CHECK(quantize(1.2, c) == 9600);
  CHECK_THROWS_AS(quantize(std::nan(""), c), DomainError);
}

TEST_CASE("quantize agrees with exact rational arithmetic")
{
  std::mt19937 rng(31);
  std::uniform_int_distribution<std::int64_t> uv(-4'200'000, 4'200'000);
  AdcConfig const c{};
  for (int i = 0; i < 5000; ++i) {
    auto const v = uv(rng);
    CHECK(quantize(static_cast<double>(v) * 1e-6, c) == rational_code(v, 4'096'000));
  }
}

TEST_CASE("property: quantize is monotone and dequantize inverts it on codes")
{
  std::mt19937 rng(32);
  for (double fs : pga_full_scales) {
    AdcConfig c{};
    c.pga_full_scale = fs;
    std::uniform_real_distribution<double> v(-1.2 * fs, 1.2 * fs);
    for (int i = 0; i < 2000; ++i) {
      double a = v(rng);
      double b = v(rng);
      if (a > b) {
        std::swap(a, b);
      }
      CHECK(quantize(a, c) <= quantize(b, c));
    }
    for (int code = -32768; code <= 32767; code += 7) {
      CHECK(quantize(dequantize(static_cast<AdcCode>(code), c), c) == code);
    }
    CHECK(quantize(dequantize(32767, c), c) == 32767);
  }
}

TEST_CASE("config validation")
{
  AdcConfig c{};
  CHECK_NOTHROW(c.validate());
  c.pga_full_scale = 3.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = {};
  c.data_rate = 100;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = {};
  c.mux_channel = 4;
  CHECK_THROWS_AS(c.validate(), DomainError);
  CHECK(adc_mode_from_string("single_shot") == AdcMode::single_shot);
  CHECK_THROWS_AS(adc_mode_from_string("burst"), DomainError);
}

TEST_CASE("read_single_shot on the simulated pot")
{
  VirtualClock clock;
  SimulatedBus bus(quiet_params(), clock);
  AdcConfig const c{};

  bus.force_theta(0.0);
  CHECK(bus.read_single_shot(0, c).code == 22400);
  bus.force_theta(1.0);
  CHECK(bus.read_single_shot(0, c).code == 9600);
  bus.force_theta(0.5);
  auto const s = bus.read_single_shot(0, c);
  CHECK(s.code == 16000);
  CHECK(s.voltage == doctest::Approx(2.0));
  CHECK(s.channel == 0);

  CHECK_THROWS_AS(bus.read_single_shot(7, c), DeviceError);
  AdcConfig continuous{};
  continuous.mode = AdcMode::continuous;
  CHECK_THROWS_AS(bus.read_single_shot(0, continuous), DeviceError);
  CHECK(bus.read_single_shot(1, c).code == 0);
}

TEST_CASE("conversion latency advances the clock by 1 / data_rate")
{
  VirtualClock clock;
  SimulatedBus bus(quiet_params(), clock);
  AdcConfig c{};
  c.data_rate = 8;
  auto const before = clock.now();
  auto const s = bus.read_single_shot(0, c);
  CHECK(s.timestamp - before == std::chrono::microseconds{ 125000 });
}

TEST_CASE("bus faults are retryable device errors")
{
  VirtualClock clock;
  SimulatedBus bus(quiet_params(), clock);
  bus.set_available(false);
  try {
    bus.read_single_shot(0, AdcConfig{});
    FAIL("expected BusError");
  } catch (const BusError& e) {
    CHECK(e.retryable());
  }
  bus.set_available(true);
  bus.inject_bus_faults(2);
  CHECK_THROWS_AS(bus.read_single_shot(0, AdcConfig{}), BusError);
  CHECK_THROWS_AS(bus.read_single_shot(0, AdcConfig{}), BusError);
  CHECK_NOTHROW(bus.read_single_shot(0, AdcConfig{}));

  try {
    bus.read_single_shot(9, AdcConfig{});
  } catch (const DeviceError& e) {
    CHECK_FALSE(e.retryable());
  }
}

TEST_CASE("relay transitions are recorded once per change")
{
  VirtualClock clock;
  SimulatedBus bus(quiet_params(), clock);
  CHECK_FALSE(bus.set_relay(false).energized);
  CHECK(bus.relay_transitions().empty());
  CHECK(bus.set_relay(true).energized);
  CHECK(bus.set_relay(true).energized);
  CHECK(bus.relay_transitions().size() == 1);
  bus.set_relay(false);
  CHECK(bus.relay_transitions().size() == 2);
}

TEST_CASE("ten seconds of pumping delivers 0.05 L into the pot")
{
  VirtualClock clock;
  auto params = quiet_params(0.2);
  params.dynamics.decay_rate = 0.0;
  SimulatedBus bus(params, clock);
  bus.set_relay(true);
  clock.advance(std::chrono::seconds{ 10 });
  bus.set_relay(false);
  CHECK(bus.delivered_liters() == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(bus.pot().theta == doctest::Approx(0.2 + 0.9 * 0.05).epsilon(1e-9));
}

TEST_CASE("property: pump mass balance over random on intervals")
{
  std::mt19937 rng(33);
  std::uniform_int_distribution<int> on_ms(1, 120000);
  std::uniform_int_distribution<int> off_ms(0, 600000);
  VirtualClock clock;
  SimulatedBus bus(quiet_params(0.0), clock);
  double expected = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto const on = std::chrono::milliseconds{ on_ms(rng) };
    bus.set_relay(true);
    clock.advance(on);
    bus.set_relay(false);
    clock.advance(std::chrono::milliseconds{ off_ms(rng) });
    expected += 0.005 * std::chrono::duration<double>(on).count();
    REQUIRE(bus.delivered_liters() == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("property: noise-free reads at fixed theta are identical")
{
  std::mt19937 rng(34);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VirtualClock clock;
  auto params = quiet_params();
  params.dynamics.decay_rate = 0.0;
  SimulatedBus bus(params, clock);
  for (int i = 0; i < 100; ++i) {
    bus.force_theta(unit(rng));
    auto const first = bus.read_single_shot(0, AdcConfig{}).code;
    for (int k = 0; k < 5; ++k) {
      CHECK(bus.read_single_shot(0, AdcConfig{}).code == first);
    }
  }
}

TEST_CASE("seeded noise is reproducible")
{
  auto params = quiet_params();
  params.noise_sigma_v = 0.002;
  params.seed = 99;
  VirtualClock c1;
  VirtualClock c2;
  SimulatedBus a(params, c1);
  SimulatedBus b(params, c2);
  for (int i = 0; i < 20; ++i) {
    CHECK(a.read_single_shot(0, AdcConfig{}).code == b.read_single_shot(0, AdcConfig{}).code);
  }
}
