#pragma once

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "hydrad/calibration.hpp"
#include "hydrad/clock.hpp"
#include "hydrad/device_bus.hpp"
#include "hydrad/history_store.hpp"
#include "hydrad/time.hpp"

namespace hydrad::control {

/// User-tunable control settings.
struct ControllerConfig
{
  double threshold_pct = 40.0;
  double check_interval_s = 1800.0;
  double base_duration_s = 5.0;
  double gain_s_per_pct = 2.0;
  double settle_delay_s = 30.0;
  int max_cycles = 5;
  double max_pump_on_s = 60.0;
  double target_margin_pct = 0.0;

  /// Throws ConfigError naming the first field that breaks an invariant.
  void validate() const;

  bool operator==(const ControllerConfig&) const = default;
};

struct MoistureReading
{
  device::AdcCode raw = 0;
  double voltage = 0.0;
  std::optional<double> percent;  ///< absent until calibrated
  int channel = 0;
  Timestamp at{};
};

enum class ControllerState
{
  idle,
  reading,
  watering,
  settling,
  alarm
};

std::string_view to_string(ControllerState state);

enum class Trigger
{
  automatic,
  manual
};

std::string_view to_string(Trigger trigger);

/// One pump-on interval and its feedback reading.
struct WateringEvent
{
  double duration_s = 0.0;
  double volume_l = 0.0;
  std::optional<double> moisture_before;
  std::optional<double> moisture_after;  ///< nullopt while pending
  Timestamp at{};
};

struct WateringSession
{
  Trigger trigger = Trigger::automatic;
  std::vector<WateringEvent> cycles;
  Timestamp started_at{};
  std::optional<Timestamp> finished_at;

  double total_volume_l() const;
};

/// What the dashboard polls. Published as immutable snapshots.
struct SystemStatus
{
  ControllerState state = ControllerState::idle;
  std::optional<MoistureReading> last_reading;
  Timestamp next_check_at{};
  /// Present exactly while state == watering.
  std::optional<WateringSession> active_session;
  /// The running or most recent session; survives settle and re-read.
  std::optional<WateringSession> last_session;
  std::optional<std::string> alarm_reason;
  std::optional<std::string> last_error;
  std::optional<std::string> degraded_reason;
  bool calibrated = false;
  bool busy = false;
  std::uint64_t checks_run = 0;
};

/// Pump-on time for a reading: zero at or above threshold, otherwise
/// min(base + gain * deficit, max_pump_on).
double compute_dose(double moisture_pct, const ControllerConfig& config);

struct DeviceSetup
{
  device::AdcDriver& adc;
  device::RelayDriver& relay;
  device::ReferenceFixture* fixture = nullptr;
  device::AdcConfig adc_config{};
  device::PumpModel pump{};
};

/// Optional callbacks for callers that want the first result early.
struct ActivityHooks
{
  std::function<void(const MoistureReading&)> on_reading;
  std::function<void(const WateringSession&)> on_pump_started;
};

class Controller;

/// Exclusive right to touch the devices. Move-only; released on destruction.
class Activity
{
public:
  Activity() = default;
  Activity(Activity&& other) noexcept;
  Activity& operator=(Activity&& other) noexcept;
  Activity(const Activity&) = delete;
  Activity& operator=(const Activity&) = delete;
  ~Activity();

  explicit operator bool() const { return owner_ != nullptr; }
  void release();

private:
  friend class Controller;
  explicit Activity(Controller* owner)
    : owner_(owner)
  {
  }
  Controller* owner_ = nullptr;
};

/// The sense-decide-actuate loop.
///
/// Every device-touching operation needs an Activity; claim() hands one out
/// or throws ConflictError, so concurrent requests are refused rather than
/// queued. The monitor loop is the only caller that waits for one. Status is
/// republished before each device action so pollers see the state the
/// hardware is about to enter.
class Controller
{
public:
  Controller(ControllerConfig config, Clock& clock, DeviceSetup devices, history::HistorySink* history = nullptr);
  ~Controller();

  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  std::shared_ptr<const SystemStatus> status() const;

  ControllerConfig config() const;
  /// Validates and applies. A new check interval reschedules the pending
  /// check to one new interval after the last one (or now, if that passed).
  void update_config(const ControllerConfig& config);

  std::optional<calibration::CalibrationProfile> profile() const;
  void set_profile(std::optional<calibration::CalibrationProfile> profile);

  /// Throws ConflictError when another activity is running.
  Activity claim();
  /// Blocks until free; empty Activity if `stop` fires.
  Activity wait_claim(std::stop_token stop);

  /// One periodic check including any watering it triggers.
  /// Throws ConflictError (busy or alarm), NotCalibratedError, DeviceError.
  SystemStatus run_check();
  SystemStatus run_check(Activity activity, const ActivityHooks& hooks = {});

  /// Single manual pump run without feedback loop. Leaves next_check_at.
  /// Throws DomainError for a duration outside (0, max_pump_on], ConflictError.
  WateringSession manual_water(double duration_s);
  WateringSession manual_water(Activity activity, double duration_s, const ActivityHooks& hooks = {});

  /// One reading, no watering decision. Recorded like any other reading.
  MoistureReading read_now(Activity activity);

  /// Median reference capture for calibration.
  device::AdcCode capture_reference(Activity activity, device::ReferenceKind kind, int n_samples);

  /// Leaves alarm and schedules the next check one interval from now.
  void clear_alarm();

  /// Sleeps until each scheduled check and runs it, until stopped.
  void monitor_loop(std::stop_token stop);

  /// Same schedule handling, driven synchronously up to `horizon`. Meant for
  /// auto-advancing virtual clocks.
  void run_monitor_until(Timestamp horizon);

  /// Aborts sleeps in progress; the relay is switched off by the aborted
  /// activity.
  void request_stop();

  /// Duration validation shared with the API layer.
  void validate_manual_duration(double duration_s) const;

private:
  friend class Activity;
  void release_activity();

  template <typename Fn>
  void update_status(Fn&& fn);
  void set_state(ControllerState next);
  void record(history::RecordKind kind, nlohmann::json payload);
  void record_error(std::string_view source, std::string_view message);
  /// Next due time one interval after `check_started`, or one interval from
  /// now if that has already passed. Remembers the anchor for update_config.
  Timestamp schedule_after(Timestamp check_started);
  void wake_monitor();
  MoistureReading take_reading();
  bool pump_cycle(WateringSession& session, double dose_s, std::optional<double> before, const ActivityHooks& hooks);
  SystemStatus run_check_from(Activity activity, const ActivityHooks& hooks, Timestamp scheduled);
  void scheduled_check(Activity activity, Timestamp due);

  Clock& clock_;
  DeviceSetup devices_;
  history::HistorySink* history_;

  mutable std::mutex config_mutex_;
  ControllerConfig config_;
  std::optional<calibration::CalibrationProfile> profile_;
  Timestamp anchor_{};

  mutable std::mutex status_mutex_;
  SystemStatus working_;
  std::shared_ptr<const SystemStatus> published_;

  std::mutex activity_mutex_;
  std::condition_variable_any activity_free_;
  bool busy_ = false;

  std::mutex record_mutex_;
  std::stop_source stop_;

  std::mutex wake_mutex_;
  std::stop_source* wake_ = nullptr;
};

}  // namespace hydrad::control
