#include "hydrad/clock.hpp"

#include "hydrad/error.hpp"

namespace hydrad {

VirtualClock::VirtualClock(Timestamp start, Mode mode, Duration auto_advance_limit)
  : now_(start)
  , mode_(mode)
  , auto_advance_limit_(auto_advance_limit)
{
}

Timestamp VirtualClock::now() const
{
  std::lock_guard lock(mutex_);
  return now_;
}

bool VirtualClock::sleep_until(Timestamp deadline, std::stop_token stop)
{
  std::unique_lock lock(mutex_);
  if (stop.stop_requested()) {
    return false;
  }
  if (deadline <= now_) {
    return true;
  }
  if (mode_ == Mode::auto_advance || deadline - now_ <= auto_advance_limit_) {
    now_ = deadline;
    wake_.notify_all();
    return true;
  }
  ++sleepers_;
  bool const reached = wake_.wait(lock, stop, [&] { return now_ >= deadline; });
  --sleepers_;
  return reached;
}

void VirtualClock::advance(Duration d)
{
  if (d < Duration::zero()) {
    throw DomainError("virtual clock cannot run backwards");
  }
  {
    std::lock_guard lock(mutex_);
    now_ += d;
  }
  wake_.notify_all();
}

void VirtualClock::set_now(Timestamp t)
{
  {
    std::lock_guard lock(mutex_);
    if (t < now_) {
      throw DomainError("virtual clock cannot run backwards");
    }
    now_ = t;
  }
  wake_.notify_all();
}

int VirtualClock::sleepers() const
{
  std::lock_guard lock(mutex_);
  return sleepers_;
}

ScaledClock::ScaledClock(double scale, Timestamp epoch)
  : scale_(scale)
  , epoch_(epoch)
  , start_(std::chrono::steady_clock::now())
{
  if (!(scale > 0.0)) {
    throw DomainError("time scale must be positive");
  }
}

Timestamp ScaledClock::now() const
{
  auto const elapsed = std::chrono::steady_clock::now() - start_;
  return epoch_ + std::chrono::duration_cast<Duration>(
                    std::chrono::duration<double, std::micro>(elapsed) * scale_);
}

bool ScaledClock::sleep_until(Timestamp deadline, std::stop_token stop)
{
  auto const remaining = deadline - now();
  if (remaining <= Duration::zero()) {
    return !stop.stop_requested();
  }
  auto const wall = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
    std::chrono::duration<double, std::micro>(remaining) / scale_);
  auto const wake_at = std::chrono::steady_clock::now() + wall;
  std::unique_lock lock(mutex_);
  wake_.wait_until(lock, stop, wake_at, [] { return false; });
  return !stop.stop_requested();
}

}  // namespace hydrad
