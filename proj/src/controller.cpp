#include "hydrad/controller.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hydrad/error.hpp"
#include "hydrad/json_codec.hpp"

namespace hydrad::control {

using nlohmann::json;

void ControllerConfig::validate() const
{
  if (!(threshold_pct > 0.0 && threshold_pct < 100.0)) {
    throw ConfigError("threshold_pct", "must be strictly between 0 and 100");
  }
  if (!(check_interval_s > 0.0)) {
    throw ConfigError("check_interval_s", "must be positive");
  }
  if (!(base_duration_s >= 0.0)) {
    throw ConfigError("base_duration_s", "must be non-negative");
  }
  if (!(gain_s_per_pct >= 0.0)) {
    throw ConfigError("gain_s_per_pct", "must be non-negative");
  }
  if (!(base_duration_s + gain_s_per_pct > 0.0)) {
    throw ConfigError("gain_s_per_pct", "base_duration_s + gain_s_per_pct must be positive");
  }
  if (!(settle_delay_s >= 0.0)) {
    throw ConfigError("settle_delay_s", "must be non-negative");
  }
  if (max_cycles < 1 || max_cycles > 20) {
    throw ConfigError("max_cycles", "must be in 1..20");
  }
  if (!(max_pump_on_s > 0.0)) {
    throw ConfigError("max_pump_on_s", "must be positive");
  }
  if (!(target_margin_pct >= 0.0)) {
    throw ConfigError("target_margin_pct", "must be non-negative");
  }
  if (!(threshold_pct + target_margin_pct <= 100.0)) {
    throw ConfigError("target_margin_pct", "threshold_pct + target_margin_pct must not exceed 100");
  }
}

std::string_view to_string(ControllerState state)
{
  switch (state) {
    case ControllerState::idle:
      return "idle";
    case ControllerState::reading:
      return "reading";
    case ControllerState::watering:
      return "watering";
    case ControllerState::settling:
      return "settling";
    case ControllerState::alarm:
      return "alarm";
  }
  return "unknown";
}

std::string_view to_string(Trigger trigger)
{
  return trigger == Trigger::automatic ? "automatic" : "manual";
}

double WateringSession::total_volume_l() const
{
  double total = 0.0;
  for (auto const& c : cycles) {
    total += c.volume_l;
  }
  return total;
}

double compute_dose(double moisture_pct, const ControllerConfig& config)
{
  if (!(moisture_pct >= 0.0 && moisture_pct <= 100.0)) {
    throw DomainError(fmt::format("moisture {} outside [0, 100]", moisture_pct));
  }
  if (moisture_pct >= config.threshold_pct) {
    return 0.0;
  }
  double const deficit = config.threshold_pct - moisture_pct;
  return std::min(config.base_duration_s + config.gain_s_per_pct * deficit, config.max_pump_on_s);
}

Activity::Activity(Activity&& other) noexcept
  : owner_(std::exchange(other.owner_, nullptr))
{
}

Activity& Activity::operator=(Activity&& other) noexcept
{
  if (this != &other) {
    release();
    owner_ = std::exchange(other.owner_, nullptr);
  }
  return *this;
}

Activity::~Activity()
{
  release();
}

void Activity::release()
{
  if (auto* owner = std::exchange(owner_, nullptr)) {
    owner->release_activity();
  }
}

namespace {

/// Keeps the relay off on every exit path out of a pump run.
class RelayGuard
{
public:
  explicit RelayGuard(device::RelayDriver& relay)
    : relay_(relay)
  {
    relay_.set_relay(true);
  }
  ~RelayGuard()
  {
    try {
      off();
    } catch (const std::exception& e) {
      spdlog::error("relay: failed to de-energize: {}", e.what());
    }
  }
  RelayGuard(const RelayGuard&) = delete;
  RelayGuard& operator=(const RelayGuard&) = delete;

  void off()
  {
    if (engaged_) {
      engaged_ = false;
      relay_.set_relay(false);
    }
  }

private:
  device::RelayDriver& relay_;
  bool engaged_ = true;
};

}  // namespace

Controller::Controller(ControllerConfig config, Clock& clock, DeviceSetup devices, history::HistorySink* history)
  : clock_(clock)
  , devices_(devices)
  , history_(history)
  , config_(config)
{
  config_.validate();
  devices_.adc_config.validate();
  devices_.pump.validate();
  devices_.relay.set_relay(false);
  anchor_ = clock_.now();
  working_.next_check_at = anchor_ + from_seconds(config_.check_interval_s);
  published_ = std::make_shared<const SystemStatus>(working_);
}

Controller::~Controller()
{
  stop_.request_stop();
  try {
    devices_.relay.set_relay(false);
  } catch (const std::exception& e) {
    spdlog::error("relay: failed to de-energize on shutdown: {}", e.what());
  }
}

std::shared_ptr<const SystemStatus> Controller::status() const
{
  std::lock_guard lock(status_mutex_);
  return published_;
}

ControllerConfig Controller::config() const
{
  std::lock_guard lock(config_mutex_);
  return config_;
}

void Controller::update_config(const ControllerConfig& config)
{
  config.validate();
  Timestamp anchor;
  bool interval_changed = false;
  {
    std::lock_guard lock(config_mutex_);
    interval_changed = config.check_interval_s != config_.check_interval_s;
    config_ = config;
    anchor = anchor_;
  }
  if (!interval_changed) {
    return;
  }
  // A running check reschedules itself when it finishes.
  {
    std::lock_guard lock(activity_mutex_);
    if (busy_) {
      return;
    }
    auto const next = std::max(anchor + from_seconds(config.check_interval_s), clock_.now());
    update_status([&](SystemStatus& s) { s.next_check_at = next; });
  }
  wake_monitor();
}

void Controller::wake_monitor()
{
  std::lock_guard lock(wake_mutex_);
  if (wake_) {
    wake_->request_stop();
  }
}

std::optional<calibration::CalibrationProfile> Controller::profile() const
{
  std::lock_guard lock(config_mutex_);
  return profile_;
}

void Controller::set_profile(std::optional<calibration::CalibrationProfile> profile)
{
  if (profile) {
    profile->validate();
  }
  bool const calibrated = profile.has_value();
  {
    std::lock_guard lock(config_mutex_);
    profile_ = std::move(profile);
  }
  update_status([&](SystemStatus& s) { s.calibrated = calibrated; });
}

template <typename Fn>
void Controller::update_status(Fn&& fn)
{
  std::lock_guard lock(status_mutex_);
  fn(working_);
  published_ = std::make_shared<const SystemStatus>(working_);
}

Activity Controller::claim()
{
  std::lock_guard lock(activity_mutex_);
  if (busy_) {
    throw ConflictError("a check, watering or calibration is already in progress");
  }
  busy_ = true;
  update_status([](SystemStatus& s) { s.busy = true; });
  return Activity(this);
}

Activity Controller::wait_claim(std::stop_token stop)
{
  std::unique_lock lock(activity_mutex_);
  if (!activity_free_.wait(lock, stop, [this] { return !busy_; })) {
    return {};
  }
  busy_ = true;
  update_status([](SystemStatus& s) { s.busy = true; });
  return Activity(this);
}

void Controller::release_activity()
{
  {
    std::lock_guard lock(activity_mutex_);
    busy_ = false;
    update_status([](SystemStatus& s) { s.busy = false; });
  }
  activity_free_.notify_all();
}

void Controller::record(history::RecordKind kind, json payload)
{
  if (!history_) {
    return;
  }
  try {
    std::lock_guard lock(record_mutex_);
    history_->append({ kind, clock_.now(), std::move(payload) });
  } catch (const Error& e) {
    spdlog::error("history: append failed: {}", e.what());
    update_status([&](SystemStatus& s) { s.degraded_reason = fmt::format("history storage: {}", e.what()); });
  }
}

void Controller::record_error(std::string_view source, std::string_view message)
{
  spdlog::warn("{}: {}", source, message);
  update_status([&](SystemStatus& s) { s.last_error = std::string(message); });
  record(history::RecordKind::error, json{ { "source", source }, { "message", message } });
}

void Controller::set_state(ControllerState next)
{
  ControllerState previous{};
  update_status([&](SystemStatus& s) {
    previous = s.state;
    s.state = next;
    if (next != ControllerState::watering) {
      s.active_session.reset();
    }
  });
  if (previous != next) {
    record(history::RecordKind::transition, json{ { "from", to_string(previous) }, { "to", to_string(next) } });
  }
}

Timestamp Controller::schedule_after(Timestamp check_started)
{
  {
    std::lock_guard lock(config_mutex_);
    anchor_ = check_started;
  }
  auto const interval = from_seconds(config().check_interval_s);
  auto next = check_started + interval;
  auto const now = clock_.now();
  if (next <= now) {
    next = now + interval;
  }
  return next;
}

MoistureReading Controller::take_reading()
{
  auto const sample = devices_.adc.read_single_shot(devices_.adc_config.mux_channel, devices_.adc_config);
  MoistureReading reading;
  reading.raw = sample.code;
  reading.voltage = sample.voltage;
  reading.channel = sample.channel;
  reading.at = sample.timestamp;
  if (auto const p = profile()) {
    reading.percent = calibration::to_percent(sample.code, *p);
  }
  update_status([&](SystemStatus& s) {
    s.last_reading = reading;
    s.last_error.reset();
  });
  record(history::RecordKind::reading, json(reading));
  return reading;
}

MoistureReading Controller::read_now(Activity activity)
{
  Activity const held = std::move(activity);
  auto const prior = status()->state;
  set_state(ControllerState::reading);
  try {
    auto reading = take_reading();
    set_state(prior);
    return reading;
  } catch (const DeviceError& e) {
    record_error("adc", e.what());
    set_state(prior);
    throw;
  }
}

bool Controller::pump_cycle(WateringSession& session,
                            double dose_s,
                            std::optional<double> before,
                            const ActivityHooks& hooks)
{
  auto const duration = std::max(from_seconds(dose_s), Duration{ 1 });
  double const flow = devices_.pump.flow_rate_lps;

  WateringEvent event;
  event.duration_s = to_seconds(duration);
  event.volume_l = flow * event.duration_s;
  event.moisture_before = before;
  event.at = clock_.now();
  session.cycles.push_back(event);

  ControllerState previous{};
  update_status([&](SystemStatus& s) {
    previous = s.state;
    s.state = ControllerState::watering;
    s.active_session = session;
    s.last_session = session;
  });
  record(history::RecordKind::transition, json{ { "from", to_string(previous) }, { "to", "watering" } });

  bool completed = false;
  {
    RelayGuard relay(devices_.relay);
    if (hooks.on_pump_started) {
      hooks.on_pump_started(session);
    }
    completed = clock_.sleep_for(duration, stop_.get_token());
    relay.off();
  }

  auto& current = session.cycles.back();
  if (!completed) {
    current.duration_s = to_seconds(clock_.now() - current.at);
    current.volume_l = flow * current.duration_s;
  }
  set_state(ControllerState::settling);
  update_status([&](SystemStatus& s) { s.last_session = session; });
  if (!completed || !clock_.sleep_for(from_seconds(config().settle_delay_s), stop_.get_token())) {
    record(history::RecordKind::watering, json{ { "trigger", to_string(session.trigger) },
                                                 { "cycle", session.cycles.size() },
                                                 { "event", current } });
    return false;
  }

  set_state(ControllerState::reading);
  try {
    auto const after = take_reading();
    current.moisture_after = after.percent;
  } catch (...) {
    record(history::RecordKind::watering, json{ { "trigger", to_string(session.trigger) },
                                                 { "cycle", session.cycles.size() },
                                                 { "event", current } });
    throw;
  }
  record(history::RecordKind::watering, json{ { "trigger", to_string(session.trigger) },
                                               { "cycle", session.cycles.size() },
                                               { "event", current } });
  update_status([&](SystemStatus& s) { s.last_session = session; });
  return true;
}

SystemStatus Controller::run_check()
{
  return run_check(claim());
}

SystemStatus Controller::run_check(Activity activity, const ActivityHooks& hooks)
{
  if (!activity) {
    throw ConflictError("no activity held");
  }
  return run_check_from(std::move(activity), hooks, clock_.now());
}

SystemStatus Controller::run_check_from([[maybe_unused]] Activity activity, const ActivityHooks& hooks, Timestamp scheduled)
{
  if (status()->state == ControllerState::alarm) {
    throw ConflictError(fmt::format("controller in alarm: {}", status()->alarm_reason.value_or("unknown")));
  }
  if (!profile()) {
    throw NotCalibratedError();
  }
  auto const cfg = config();
  update_status([](SystemStatus& s) { ++s.checks_run; });

  auto finish_idle = [&] {
    auto const next = schedule_after(scheduled);
    set_state(ControllerState::idle);
    update_status([&](SystemStatus& s) { s.next_check_at = next; });
  };

  set_state(ControllerState::reading);
  MoistureReading reading;
  try {
    reading = take_reading();
  } catch (const DeviceError& e) {
    record_error("check", e.what());
    finish_idle();
    throw;
  }
  if (hooks.on_reading) {
    hooks.on_reading(reading);
  }

  double pct = reading.percent.value_or(0.0);
  if (pct >= cfg.threshold_pct) {
    finish_idle();
    return *status();
  }

  WateringSession session;
  session.trigger = Trigger::automatic;
  session.started_at = clock_.now();

  double const target = cfg.threshold_pct + cfg.target_margin_pct;
  ControllerConfig dosing = cfg;
  dosing.threshold_pct = target;

  auto close_session = [&] {
    session.finished_at = clock_.now();
    update_status([&](SystemStatus& s) { s.last_session = session; });
  };

  try {
    while (pct < target && static_cast<int>(session.cycles.size()) < cfg.max_cycles) {
      if (!pump_cycle(session, compute_dose(pct, dosing), pct, hooks)) {
        close_session();
        record_error("check", "watering interrupted by shutdown");
        finish_idle();
        return *status();
      }
      pct = session.cycles.back().moisture_after.value_or(0.0);
    }
  } catch (const DeviceError& e) {
    close_session();
    record_error("check", e.what());
    finish_idle();
    throw;
  }
  close_session();

  if (pct >= target) {
    finish_idle();
    return *status();
  }

  auto const reason = fmt::format("moisture not restored after {} watering cycles ({:.1f}% < {:.1f}%)",
                                  session.cycles.size(), pct, target);
  auto const next = schedule_after(scheduled);
  record_error("check", reason);
  set_state(ControllerState::alarm);
  update_status([&](SystemStatus& s) {
    s.alarm_reason = reason;
    s.next_check_at = next;
  });
  return *status();
}

void Controller::validate_manual_duration(double duration_s) const
{
  auto const max = config().max_pump_on_s;
  if (!(duration_s > 0.0 && duration_s <= max)) {
    throw DomainError(fmt::format("duration_s must be in (0, {}]", max));
  }
}

WateringSession Controller::manual_water(double duration_s)
{
  validate_manual_duration(duration_s);
  return manual_water(claim(), duration_s);
}

WateringSession Controller::manual_water(Activity activity, double duration_s, const ActivityHooks& hooks)
{
  if (!activity) {
    throw ConflictError("no activity held");
  }
  validate_manual_duration(duration_s);
  if (status()->state == ControllerState::alarm) {
    throw ConflictError(fmt::format("controller in alarm: {}", status()->alarm_reason.value_or("unknown")));
  }

  set_state(ControllerState::reading);
  MoistureReading before;
  try {
    before = take_reading();
  } catch (const DeviceError& e) {
    record_error("manual_water", e.what());
    set_state(ControllerState::idle);
    throw;
  }
  if (hooks.on_reading) {
    hooks.on_reading(before);
  }

  WateringSession session;
  session.trigger = Trigger::manual;
  session.started_at = clock_.now();
  bool completed = false;
  try {
    completed = pump_cycle(session, duration_s, before.percent, hooks);
  } catch (const DeviceError& e) {
    session.finished_at = clock_.now();
    update_status([&](SystemStatus& s) { s.last_session = session; });
    record_error("manual_water", e.what());
    set_state(ControllerState::idle);
    throw;
  }
  session.finished_at = clock_.now();
  update_status([&](SystemStatus& s) { s.last_session = session; });
  if (!completed) {
    record_error("manual_water", "watering interrupted by shutdown");
  }
  set_state(ControllerState::idle);
  return session;
}

device::AdcCode Controller::capture_reference(Activity activity, device::ReferenceKind kind, int n_samples)
{
  if (!activity) {
    throw ConflictError("no activity held");
  }
  if (n_samples < 1) {
    throw DomainError("n_samples must be at least 1");
  }
  if (status()->state == ControllerState::alarm) {
    throw ConflictError("controller in alarm; clear it before calibrating");
  }
  set_state(ControllerState::reading);
  try {
    auto const code =
      calibration::capture_reference(devices_.adc, devices_.adc_config, kind, n_samples, devices_.fixture);
    set_state(ControllerState::idle);
    return code;
  } catch (const DeviceError& e) {
    record_error("calibrate", e.what());
    set_state(ControllerState::idle);
    throw;
  }
}

void Controller::clear_alarm()
{
  if (status()->state != ControllerState::alarm) {
    return;
  }
  auto const next = schedule_after(clock_.now());
  set_state(ControllerState::idle);
  update_status([&](SystemStatus& s) {
    s.alarm_reason.reset();
    s.next_check_at = next;
  });
  wake_monitor();
}

void Controller::scheduled_check(Activity activity, Timestamp due)
{
  auto const state = status()->state;
  if (state == ControllerState::alarm) {
    spdlog::info("monitor: check skipped, controller in alarm");
    auto const next = schedule_after(due);
    update_status([&](SystemStatus& s) { s.next_check_at = next; });
    return;
  }
  if (!profile()) {
    record_error("monitor", "scheduled check skipped: not calibrated");
    auto const next = schedule_after(due);
    update_status([&](SystemStatus& s) { s.next_check_at = next; });
    return;
  }
  try {
    run_check_from(std::move(activity), {}, due);
  } catch (const Error& e) {
    spdlog::warn("monitor: check failed: {}", e.what());
  }
}

void Controller::monitor_loop(std::stop_token stop)
{
  while (!stop.stop_requested()) {
    auto const due = status()->next_check_at;
    std::stop_source wake;
    std::stop_callback const forward(stop, [&wake] { wake.request_stop(); });
    {
      std::lock_guard lock(wake_mutex_);
      wake_ = &wake;
    }
    bool const slept = clock_.sleep_until(due, wake.get_token());
    {
      std::lock_guard lock(wake_mutex_);
      wake_ = nullptr;
    }
    if (stop.stop_requested()) {
      break;
    }
    if (!slept) {
      continue;  // schedule changed
    }
    if (clock_.now() < status()->next_check_at) {
      continue;  // rescheduled while asleep
    }
    auto activity = wait_claim(stop);
    if (!activity) {
      break;
    }
    auto const current_due = status()->next_check_at;
    if (clock_.now() < current_due) {
      continue;
    }
    scheduled_check(std::move(activity), current_due);
  }
}

void Controller::run_monitor_until(Timestamp horizon)
{
  while (true) {
    auto const due = status()->next_check_at;
    if (due > horizon) {
      break;
    }
    clock_.sleep_until(due);
    scheduled_check(claim(), due);
  }
  clock_.sleep_until(horizon);
}

void Controller::request_stop()
{
  stop_.request_stop();
}

}  // namespace hydrad::control
