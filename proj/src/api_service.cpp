#include "hydrad/api_service.hpp"

#include <chrono>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hydrad/error.hpp"
#include "hydrad/json_codec.hpp"

namespace hydrad::api {

using nlohmann::json;

namespace {

/// Upper bound on how long a request waits for its first result.
constexpr auto first_result_timeout = std::chrono::seconds{ 30 };

ApiResponse ok(json body)
{
  return { 200, std::move(body) };
}

/// Maps the daemon's error taxonomy onto ApiError bodies.
ApiResponse from_current_exception()
{
  try {
    throw;
  } catch (const NotCalibratedError& e) {
    return error_response(ErrorCode::not_calibrated, e.what());
  } catch (const ConflictError& e) {
    return error_response(ErrorCode::conflict, e.what());
  } catch (const DomainError& e) {
    return error_response(ErrorCode::bad_request, e.what());
  } catch (const ConfigError& e) {
    return error_response(ErrorCode::bad_request, e.what());
  } catch (const InvalidProfileError& e) {
    return error_response(ErrorCode::bad_request, fmt::format("invalid profile: {}", e.what()));
  } catch (const DeviceError& e) {
    return error_response(ErrorCode::device_error, e.what());
  } catch (const std::exception& e) {
    return error_response(ErrorCode::internal, e.what());
  }
}

json parse_body(std::string_view body)
{
  if (body.empty()) {
    return json::object();
  }
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw DomainError(fmt::format("request body is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) {
    throw DomainError("request body must be a JSON object");
  }
  return doc;
}

/// Delivers the first value (or failure) of a background job to the
/// request thread exactly once.
template <typename T>
class FirstResult
{
public:
  void set(const T& value)
  {
    std::lock_guard lock(mutex_);
    if (!done_) {
      done_ = true;
      promise_.set_value(value);
    }
  }

  void fail(std::exception_ptr error)
  {
    std::lock_guard lock(mutex_);
    if (!done_) {
      done_ = true;
      promise_.set_exception(std::move(error));
    }
  }

  std::future<T> future() { return promise_.get_future(); }

private:
  std::mutex mutex_;
  bool done_ = false;
  std::promise<T> promise_;
};

}  // namespace

std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::bad_request:
      return "bad_request";
    case ErrorCode::conflict:
      return "conflict";
    case ErrorCode::not_calibrated:
      return "not_calibrated";
    case ErrorCode::device_error:
      return "device_error";
    case ErrorCode::internal:
      return "internal";
  }
  return "internal";
}

int http_status(ErrorCode code)
{
  switch (code) {
    case ErrorCode::bad_request:
      return 400;
    case ErrorCode::conflict:
    case ErrorCode::not_calibrated:
      return 409;
    case ErrorCode::device_error:
      return 502;
    case ErrorCode::internal:
      return 500;
  }
  return 500;
}

ApiResponse error_response(ErrorCode code, std::string message)
{
  return { http_status(code), json{ { "code", to_string(code) }, { "message", std::move(message) } } };
}

ApiService::ApiService(ApiContext context)
  : ctx_(std::move(context))
  , worker_([this](std::stop_token stop) { worker_loop(stop); })
{
}

ApiService::~ApiService()
{
  shutdown();
}

void ApiService::shutdown()
{
  if (worker_.joinable()) {
    worker_.request_stop();
    worker_.join();
  }
}

void ApiService::submit(std::packaged_task<void()> job)
{
  {
    std::lock_guard lock(jobs_mutex_);
    jobs_.push_back(std::move(job));
  }
  jobs_ready_.notify_one();
}

void ApiService::worker_loop(std::stop_token stop)
{
  while (true) {
    std::packaged_task<void()> job;
    {
      std::unique_lock lock(jobs_mutex_);
      if (!jobs_ready_.wait(lock, stop, [this] { return !jobs_.empty(); })) {
        break;
      }
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    job();
  }
  // Jobs still queued at shutdown run to their (interrupted) end so every
  // held activity is released and every waiting request is answered.
  std::unique_lock lock(jobs_mutex_);
  while (!jobs_.empty()) {
    auto job = std::move(jobs_.front());
    jobs_.pop_front();
    lock.unlock();
    job();
    lock.lock();
  }
}

ApiResponse ApiService::get_status() const
{
  return ok(json(*ctx_.controller.status()));
}

ApiResponse ApiService::post_check()
{
  try {
    if (!ctx_.controller.profile()) {
      throw NotCalibratedError();
    }
    auto activity = ctx_.controller.claim();
    if (ctx_.controller.status()->state == control::ControllerState::alarm) {
      throw ConflictError(fmt::format("controller in alarm: {}",
                                      ctx_.controller.status()->alarm_reason.value_or("unknown")));
    }

    auto result = std::make_shared<FirstResult<control::MoistureReading>>();
    auto future = result->future();
    submit(std::packaged_task<void()>([this, result, activity = std::move(activity)]() mutable {
      control::ActivityHooks hooks;
      hooks.on_reading = [result](const control::MoistureReading& r) { result->set(r); };
      try {
        ctx_.controller.run_check(std::move(activity), hooks);
      } catch (...) {
        result->fail(std::current_exception());
      }
    }));

    if (future.wait_for(first_result_timeout) != std::future_status::ready) {
      return error_response(ErrorCode::internal, "timed out waiting for the reading");
    }
    return ok(json(future.get()));
  } catch (...) {
    return from_current_exception();
  }
}

ApiResponse ApiService::post_water(std::string_view body)
{
  try {
    auto const doc = parse_body(body);
    auto const it = doc.find("duration_s");
    if (it == doc.end() || !it->is_number()) {
      throw DomainError("duration_s: required number of seconds");
    }
    double const duration = it->get<double>();
    ctx_.controller.validate_manual_duration(duration);

    auto activity = ctx_.controller.claim();
    if (ctx_.controller.status()->state == control::ControllerState::alarm) {
      throw ConflictError(fmt::format("controller in alarm: {}",
                                      ctx_.controller.status()->alarm_reason.value_or("unknown")));
    }

    auto result = std::make_shared<FirstResult<control::WateringSession>>();
    auto future = result->future();
    submit(std::packaged_task<void()>([this, result, duration, activity = std::move(activity)]() mutable {
      control::ActivityHooks hooks;
      hooks.on_pump_started = [result](const control::WateringSession& s) { result->set(s); };
      try {
        auto const session = ctx_.controller.manual_water(std::move(activity), duration, hooks);
        result->set(session);
      } catch (...) {
        result->fail(std::current_exception());
      }
    }));

    if (future.wait_for(first_result_timeout) != std::future_status::ready) {
      return error_response(ErrorCode::internal, "timed out waiting for the pump to start");
    }
    return ok(json(future.get()));
  } catch (...) {
    return from_current_exception();
  }
}

ApiResponse ApiService::get_config() const
{
  return ok(json(ctx_.controller.config()));
}

ApiResponse ApiService::put_config(std::string_view body)
{
  try {
    auto const doc = parse_body(body);
    auto const next = control::merge_config(ctx_.controller.config(), doc);
    if (ctx_.config_file) {
      ctx_.config_file->store_controller(next);
    }
    ctx_.controller.update_config(next);
    spdlog::info("config: controller settings updated");
    return ok(json(next));
  } catch (const ConfigError& e) {
    return error_response(ErrorCode::bad_request, e.what());
  } catch (...) {
    return from_current_exception();
  }
}

ApiResponse ApiService::get_history(const QueryParams& params) const
{
  try {
    auto param = [&](const char* key) -> std::optional<std::string> {
      auto const it = params.find(key);
      if (it == params.end() || it->second.empty()) {
        return std::nullopt;
      }
      return it->second;
    };
    auto timestamp = [&](const char* key, Timestamp fallback) {
      auto const text = param(key);
      if (!text) {
        return fallback;
      }
      try {
        return parse_iso8601(*text);
      } catch (const DomainError& e) {
        throw DomainError(fmt::format("{}: {}", key, e.what()));
      }
    };

    auto const from = timestamp("from", Timestamp::min());
    auto const to = timestamp("to", Timestamp::max());
    if (from > to) {
      throw DomainError("from must not be after to");
    }
    history::KindSet kinds = history::KindSet::all();
    if (auto const text = param("kinds")) {
      try {
        kinds = history::KindSet::parse(*text);
      } catch (const DomainError& e) {
        throw DomainError(fmt::format("kinds: {}", e.what()));
      }
    }

    json out = json::array();
    for (auto const& record : ctx_.history.query(from, to, kinds)) {
      out.push_back(history::to_json(record));
    }
    return ok(std::move(out));
  } catch (...) {
    return from_current_exception();
  }
}

ApiResponse ApiService::post_calibrate(std::string_view body)
{
  try {
    auto const doc = parse_body(body);
    auto const phase = doc.find("phase");
    if (phase == doc.end() || !phase->is_string()) {
      throw DomainError("phase: required, 'dry' or 'wet'");
    }
    auto const kind = device::reference_kind_from_string(phase->get<std::string>());
    int samples = ctx_.default_samples;
    if (auto const n = doc.find("n_samples"); n != doc.end()) {
      if (!n->is_number_integer() || n->get<int>() < 1) {
        throw DomainError("n_samples: must be a positive integer");
      }
      samples = n->get<int>();
    }

    std::lock_guard lock(calibration_mutex_);
    auto const code = ctx_.controller.capture_reference(ctx_.controller.claim(), kind, samples);
    spdlog::info("calibrate: {} reference raw={}", device::to_string(kind), code);

    json response{ { "phase", device::to_string(kind) }, { "raw", code } };
    auto const profile = workflow_.record(kind, code, ctx_.clock.now(), ctx_.profile_label);
    if (profile) {
      if (!ctx_.profile_path.empty()) {
        try {
          calibration::save_profile(*profile, ctx_.profile_path);
        } catch (...) {
          workflow_.restore(profile->raw_dry, profile->raw_wet);
          throw;
        }
      }
      ctx_.controller.set_profile(*profile);
      spdlog::info("calibrate: profile raw_dry={} raw_wet={} saved", profile->raw_dry, profile->raw_wet);
    }
    auto pending = [&](device::ReferenceKind k) {
      auto const v = workflow_.pending(k);
      return v ? json(*v) : json(nullptr);
    };
    response["complete"] = profile.has_value();
    response["profile"] = profile ? json(*profile) : json(nullptr);
    response["pending"] = json{ { "raw_dry", pending(device::ReferenceKind::dry) },
                                { "raw_wet", pending(device::ReferenceKind::wet) } };
    return ok(std::move(response));
  } catch (...) {
    return from_current_exception();
  }
}

ApiResponse ApiService::post_clear_alarm()
{
  try {
    ctx_.controller.clear_alarm();
    return get_status();
  } catch (...) {
    return from_current_exception();
  }
}

namespace {

void reply(httplib::Response& res, const ApiResponse& api)
{
  res.status = api.status;
  res.set_content(api.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(ApiService& api, std::optional<std::filesystem::path> static_dir)
  : api_(api)
  , server_(std::make_unique<httplib::Server>())
{
  auto& srv = *server_;
  srv.Get("/api/status", [this](const httplib::Request&, httplib::Response& res) { reply(res, api_.get_status()); });
  srv.Post("/api/check", [this](const httplib::Request&, httplib::Response& res) { reply(res, api_.post_check()); });
  srv.Post("/api/water",
           [this](const httplib::Request& req, httplib::Response& res) { reply(res, api_.post_water(req.body)); });
  srv.Get("/api/config", [this](const httplib::Request&, httplib::Response& res) { reply(res, api_.get_config()); });
  srv.Put("/api/config",
          [this](const httplib::Request& req, httplib::Response& res) { reply(res, api_.put_config(req.body)); });
  srv.Get("/api/history", [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params;
    for (auto const& [key, value] : req.params) {
      params.emplace(key, value);
    }
    reply(res, api_.get_history(params));
  });
  srv.Post("/api/calibrate",
           [this](const httplib::Request& req, httplib::Response& res) { reply(res, api_.post_calibrate(req.body)); });
  srv.Post("/api/alarm/clear",
           [this](const httplib::Request&, httplib::Response& res) { reply(res, api_.post_clear_alarm()); });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unhandled error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    reply(res, error_response(ErrorCode::internal, message));
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) {
      return;
    }
    auto const status = res.status;
    auto api = error_response(ErrorCode::bad_request, fmt::format("no route for {} {}", req.method, req.path));
    if (status >= 500) {
      api = error_response(ErrorCode::internal, fmt::format("HTTP {}", status));
    }
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
  });

  if (static_dir) {
    std::error_code ec;
    if (std::filesystem::is_directory(*static_dir, ec)) {
      srv.set_mount_point("/", static_dir->string());
    } else {
      spdlog::info("http: dashboard directory '{}' not found, serving API only", static_dir->string());
    }
  }
}

HttpServer::~HttpServer()
{
  stop();
}

int HttpServer::start(const std::string& host, int port)
{
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host.c_str());
  } else if (!server_->bind_to_port(host.c_str(), port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(fmt::format("cannot bind HTTP server to {}:{}", host, port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  return bound;
}

void HttpServer::stop()
{
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

}  // namespace hydrad::api
