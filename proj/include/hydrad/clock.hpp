#pragma once

#include <condition_variable>
#include <mutex>
#include <stop_token>

#include "hydrad/time.hpp"

namespace hydrad {

/// Time source injected into everything that waits or timestamps.
class Clock
{
public:
  virtual ~Clock() = default;

  virtual Timestamp now() const = 0;

  /// Blocks until `deadline`. Returns false if `stop` fired first.
  virtual bool sleep_until(Timestamp deadline, std::stop_token stop = {}) = 0;

  bool sleep_for(Duration d, std::stop_token stop = {})
  {
    return sleep_until(now() + d, std::move(stop));
  }

  /// True for clocks whose time is not wall time (virtual or scaled).
  virtual bool simulated() const = 0;
};

/// Deterministic clock for tests and scripted simulations.
///
/// In `auto_advance` mode a sleep simply moves time forward to the deadline,
/// so a whole control session runs in microseconds of real time. In `manual`
/// mode sleepers block until another thread calls advance(); sleeps no
/// longer than `auto_advance_limit` still complete immediately, which lets
/// ADC conversion latency pass without a driver thread.
class VirtualClock final : public Clock
{
public:
  enum class Mode
  {
    auto_advance,
    manual
  };

  explicit VirtualClock(Timestamp start = simulation_epoch(),
                        Mode mode = Mode::auto_advance,
                        Duration auto_advance_limit = Duration::zero());

  Timestamp now() const override;
  bool sleep_until(Timestamp deadline, std::stop_token stop = {}) override;
  bool simulated() const override { return true; }

  void advance(Duration d);
  void set_now(Timestamp t);

  /// Threads currently blocked in sleep_until (manual mode only).
  int sleepers() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable_any wake_;
  Timestamp now_;
  Mode mode_;
  Duration auto_advance_limit_;
  int sleepers_ = 0;
};

/// Wall-driven clock running `scale` times faster than real time from
/// `epoch`. scale == 1 is the production clock.
class ScaledClock final : public Clock
{
public:
  explicit ScaledClock(double scale, Timestamp epoch);

  Timestamp now() const override;
  bool sleep_until(Timestamp deadline, std::stop_token stop = {}) override;
  bool simulated() const override { return scale_ != 1.0; }

  double scale() const { return scale_; }

private:
  double scale_;
  Timestamp epoch_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mutex_;
  std::condition_variable_any wake_;
};

}  // namespace hydrad
