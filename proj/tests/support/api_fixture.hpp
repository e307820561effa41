#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "hydrad/api_service.hpp"
#include "hydrad/config.hpp"
#include "schema_check.hpp"
#include "support.hpp"

namespace hydrad::testing {

inline SchemaRegistry& schemas()
{
  static SchemaRegistry registry(HYDRAD_SOURCE_DIR "/schemas");
  return registry;
}

template <typename Pred>
bool eventually(Pred pred)
{
  for (int i = 0; i < 4000; ++i) {
    if (pred()) {
      return true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds{ 1 });
  }
  return false;
}

struct Reply
{
  int status = 0;
  nlohmann::json body;
};

/// A controller over a simulated pot, served on an ephemeral port. Every
/// non-2xx body is checked against the error schema as it arrives.
struct ApiRig
{
  explicit ApiRig(device::SimulationParams params = quiet_params(),
                  VirtualClock::Mode mode = VirtualClock::Mode::manual,
                  bool with_fixture = true)
    : clock(simulation_epoch(), mode, std::chrono::milliseconds{ 50 })
    , bus(params, clock)
    , history(dir / "history.jsonl", history::HistoryOptions{ 1u << 20, 3, false })
  {
    {
      std::ofstream(dir / "hydrad.json") << R"({"server": {"port": 0}})";
    }
    config_file = std::make_unique<ConfigFile>(dir / "hydrad.json", load_config(dir / "hydrad.json"));
    control::DeviceSetup const setup{ bus, bus, with_fixture ? &bus : nullptr, {}, params.pump };
    controller = std::make_unique<control::Controller>(control::ControllerConfig{}, clock, setup, &history);
    service = std::make_unique<api::ApiService>(
      api::ApiContext{ *controller, history, clock, config_file.get(), dir / "profile.json", "test", 5 });
    std::filesystem::create_directories(dir / "web");
    {
      std::ofstream(dir / "web" / "index.html") << "<!doctype html><title>hydrad</title>";
    }
    server = std::make_unique<api::HttpServer>(*service, dir / "web");
    port = server->start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(10, 0);
  }

  ~ApiRig()
  {
    controller->request_stop();
    server->stop();
    service->shutdown();
  }

  ApiRig(const ApiRig&) = delete;
  ApiRig& operator=(const ApiRig&) = delete;

  Reply to_reply(const httplib::Result& res)
  {
    if (!res) {
      throw std::runtime_error("HTTP request failed: " + httplib::to_string(res.error()));
    }
    Reply r{ res->status, nlohmann::json() };
    if (!res->body.empty()) {
      r.body = nlohmann::json::parse(res->body);
    }
    if (r.status >= 300) {
      expect_schema("error.schema.json", r.body);
    }
    return r;
  }

  Reply get(const std::string& path) { return to_reply(client->Get(path.c_str())); }
  Reply post(const std::string& path, const std::string& body = "")
  {
    return to_reply(client->Post(path.c_str(), body, "application/json"));
  }
  Reply put(const std::string& path, const std::string& body)
  {
    return to_reply(client->Put(path.c_str(), body, "application/json"));
  }

  void expect_schema(const std::string& name, const nlohmann::json& body)
  {
    if (auto v = schemas().violations(name, body); !v.empty()) {
      schema_failures.push_back(std::move(v));
    }
  }

  nlohmann::json status()
  {
    auto r = get("/api/status");
    expect_schema("status.schema.json", r.body);
    return r.body;
  }

  bool calibrate()
  {
    return post("/api/calibrate", R"({"phase":"dry"})").status == 200 &&
           post("/api/calibrate", R"({"phase":"wet"})").status == 200;
  }

  bool idle()
  {
    auto const s = controller->status();
    return s->state == control::ControllerState::idle && !s->busy;
  }

  /// Advances the manual clock once the controller is asleep on it.
  bool advance_when_sleeping(Duration d)
  {
    if (!eventually([&] { return clock.sleepers() > 0; })) {
      return false;
    }
    clock.advance(d);
    return true;
  }

  /// Keeps releasing sleeps until the controller is idle again.
  bool drive_to_idle()
  {
    return eventually([&] {
      if (idle()) {
        return true;
      }
      if (clock.sleepers() > 0) {
        clock.advance(std::chrono::seconds{ 60 });
      }
      return false;
    });
  }

  TempDir dir;
  VirtualClock clock;
  device::SimulatedBus bus;
  history::HistoryStore history;
  std::unique_ptr<ConfigFile> config_file;
  std::unique_ptr<control::Controller> controller;
  std::unique_ptr<api::ApiService> service;
  std::unique_ptr<api::HttpServer> server;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
  std::vector<std::string> schema_failures;
};

}  // namespace hydrad::testing
