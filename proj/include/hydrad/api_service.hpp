#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <json.hpp>

#include "hydrad/calibration.hpp"
#include "hydrad/clock.hpp"
#include "hydrad/config.hpp"
#include "hydrad/controller.hpp"
#include "hydrad/history_store.hpp"

namespace httplib {
class Server;
}

namespace hydrad::api {

enum class ErrorCode
{
  bad_request,
  conflict,
  not_calibrated,
  device_error,
  internal
};

std::string_view to_string(ErrorCode code);
int http_status(ErrorCode code);

struct ApiResponse
{
  int status = 200;
  nlohmann::json body;
};

/// {"code": ..., "message": ...} with the matching HTTP status.
ApiResponse error_response(ErrorCode code, std::string message);

using QueryParams = std::map<std::string, std::string>;

struct ApiContext
{
  control::Controller& controller;
  const history::HistoryStore& history;
  Clock& clock;
  ConfigFile* config_file = nullptr;  ///< null: PUT /api/config is not persisted
  std::filesystem::path profile_path;
  std::string profile_label = "default";
  int default_samples = calibration::default_reference_samples;
};

/// Endpoint logic, independent of the HTTP transport.
///
/// Commands that run for a while (check, water) claim the controller on the
/// request thread, so a second request gets its 409 immediately, then hand
/// the claim to a background worker. The response goes out as soon as the
/// first result exists: the reading for a check, the opened session for a
/// watering request.
class ApiService
{
public:
  explicit ApiService(ApiContext context);
  ~ApiService();

  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  ApiResponse get_status() const;
  ApiResponse post_check();
  ApiResponse post_water(std::string_view body);
  ApiResponse get_config() const;
  ApiResponse put_config(std::string_view body);
  ApiResponse get_history(const QueryParams& params) const;
  ApiResponse post_calibrate(std::string_view body);
  ApiResponse post_clear_alarm();

  /// Drains the background worker. The controller must already have been
  /// asked to stop so no job sleeps forever.
  void shutdown();

private:
  void submit(std::packaged_task<void()> job);
  void worker_loop(std::stop_token stop);

  ApiContext ctx_;
  std::mutex calibration_mutex_;
  calibration::CalibrationWorkflow workflow_;

  std::mutex jobs_mutex_;
  std::condition_variable_any jobs_ready_;
  std::deque<std::packaged_task<void()>> jobs_;
  std::jthread worker_;
};

/// cpp-httplib transport for ApiService, plus the dashboard's static files.
class HttpServer
{
public:
  HttpServer(ApiService& api, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks a free
  /// port. Returns the bound port; throws Error if binding fails.
  int start(const std::string& host, int port);
  void stop();

private:
  ApiService& api_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace hydrad::api
