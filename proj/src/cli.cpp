#include "hydrad/cli.hpp"

#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <pthread.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hydrad/calibration.hpp"
#include "hydrad/config.hpp"
#include "hydrad/daemon.hpp"
#include "hydrad/error.hpp"
#include "hydrad/file_util.hpp"

namespace hydrad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_to_stderr()
{
  if (!spdlog::get("hydrad")) {
    auto logger = spdlog::stderr_color_mt("hydrad");
    logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
    spdlog::set_default_logger(logger);
  }
}

fs::path pending_path(const fs::path& profile_path)
{
  auto p = profile_path;
  p += ".pending";
  return p;
}

/// Captures still waiting for their partner phase between CLI runs.
void load_pending(calibration::CalibrationWorkflow& workflow, const fs::path& path)
{
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    return;
  }
  try {
    auto const doc = json::parse(read_file(path));
    auto slot = [&](const char* key) -> std::optional<device::AdcCode> {
      auto const it = doc.find(key);
      if (it == doc.end() || it->is_null()) {
        return std::nullopt;
      }
      return it->get<device::AdcCode>();
    };
    workflow.restore(slot("raw_dry"), slot("raw_wet"));
  } catch (const std::exception& e) {
    spdlog::warn("calibrate: discarding unreadable '{}': {}", path.string(), e.what());
  }
}

void store_pending(const calibration::CalibrationWorkflow& workflow, const fs::path& path)
{
  auto slot = [&](device::ReferenceKind kind) {
    auto const v = workflow.pending(kind);
    return v ? json(*v) : json(nullptr);
  };
  json const doc{ { "raw_dry", slot(device::ReferenceKind::dry) }, { "raw_wet", slot(device::ReferenceKind::wet) } };
  write_file_atomic(path, doc.dump() + "\n");
}

int do_read(const fs::path& config_path, bool raw_only, std::ostream& out)
{
  auto const config = load_config(config_path);
  DeviceRig rig(config);
  control::Controller controller(config.controller, rig.clock(), rig.setup());
  if (!raw_only) {
    auto profile = load_startup_profile(config.calibration.profile_path);
    if (!profile) {
      throw NotCalibratedError();
    }
    controller.set_profile(std::move(profile));
  }
  auto const reading = controller.read_now(controller.claim());
  if (raw_only) {
    out << reading.raw << '\n';
  } else {
    out << fmt::format("moisture={:.1f}% raw={}", *reading.percent, reading.raw) << '\n';
  }
  return exit_ok;
}

int do_calibrate(const fs::path& config_path, const std::string& phase, std::optional<int> samples, std::ostream& out)
{
  auto const config = load_config(config_path);
  auto const kind = device::reference_kind_from_string(phase);
  int const n = samples.value_or(config.calibration.n_samples);
  if (n < 1) {
    throw DomainError("--samples must be at least 1");
  }

  DeviceRig rig(config);
  control::Controller controller(config.controller, rig.clock(), rig.setup());
  auto const profile_path = config.calibration.profile_path;
  auto const pending_file = pending_path(profile_path);

  calibration::CalibrationWorkflow workflow;
  load_pending(workflow, pending_file);
  auto const code = controller.capture_reference(controller.claim(), kind, n);
  out << fmt::format("phase={} raw={}", device::to_string(kind), code) << '\n';

  std::optional<calibration::CalibrationProfile> profile;
  try {
    profile = workflow.record(kind, code, rig.clock().now(), config.calibration.label);
  } catch (const InvalidProfileError&) {
    store_pending(workflow, pending_file);
    throw;
  }
  if (!profile) {
    store_pending(workflow, pending_file);
    auto const missing = kind == device::ReferenceKind::dry ? "wet" : "dry";
    out << fmt::format("pending: run calibrate --phase {} to complete the profile", missing) << '\n';
    return exit_ok;
  }
  calibration::save_profile(*profile, profile_path);
  std::error_code ec;
  fs::remove(pending_file, ec);
  out << fmt::format("profile saved to {} raw_dry={} raw_wet={}", profile_path.string(), profile->raw_dry,
                     profile->raw_wet)
      << '\n';
  return exit_ok;
}

int do_serve(const fs::path& config_path, std::optional<double> time_scale)
{
  auto config = load_config(config_path);
  if (time_scale) {
    if (config.backend == Backend::hardware) {
      throw ConfigError("--time-scale", "only available with the simulated backend");
    }
    if (!(*time_scale > 0.0)) {
      throw ConfigError("--time-scale", "must be positive");
    }
    config.time_scale = *time_scale;
  }

  // Block the shutdown signals before any thread starts so only sigwait
  // below ever sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  int signal_number = 0;
  {
    Daemon daemon(config, config_path);
    daemon.start();
    spdlog::info("daemon: running, time scale {}", config.time_scale);
    sigwait(&signals, &signal_number);
    spdlog::info("daemon: received signal {}, shutting down", signal_number);
    daemon.stop();
  }
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return exit_ok;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn)
{
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DeviceError& e) {
    err << "device error: " << e.what() << '\n';
    return exit_runtime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  log_to_stderr();

  CLI::App app{ "hydrad: automated irrigation controller" };
  app.name("hydrad");
  app.require_subcommand(1);

  std::string config_path = "./hydrad.json";
  std::optional<double> time_scale;
  bool raw_only = false;
  std::string phase;
  std::optional<int> samples;

  auto* serve = app.add_subcommand("serve", "Run the daemon: monitor loop and HTTP API");
  serve->add_option("--config", config_path, "Config file")->capture_default_str();
  serve->add_option("--time-scale", time_scale, "Simulated seconds per wall second (simulation only)");

  auto* read = app.add_subcommand("read", "Take one moisture reading");
  read->add_option("--config", config_path, "Config file")->capture_default_str();
  read->add_flag("--raw", raw_only, "Print the raw ADC code only");

  auto* calibrate = app.add_subcommand("calibrate", "Capture a dry or wet reference");
  calibrate->add_option("--config", config_path, "Config file")->capture_default_str();
  calibrate->add_option("--phase", phase, "Reference medium")->required()->check(CLI::IsMember({ "dry", "wet" }));
  calibrate->add_option("--samples", samples, "Reads per capture (median)")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int const code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  if (serve->parsed()) {
    return guarded(err, [&] { return do_serve(config_path, time_scale); });
  }
  if (read->parsed()) {
    return guarded(err, [&] {
      try {
        return do_read(config_path, raw_only, out);
      } catch (const NotCalibratedError& e) {
        err << "error: " << e.what() << "; run 'hydrad calibrate' or use --raw\n";
        return exit_runtime;
      }
    });
  }
  return guarded(err, [&] { return do_calibrate(config_path, phase, samples, out); });
}

int main(int argc, char** argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hydrad::cli
