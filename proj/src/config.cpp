#include "hydrad/config.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hydrad/error.hpp"
#include "hydrad/file_util.hpp"
#include "hydrad/json_codec.hpp"

namespace hydrad {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Typed access to one object section, with dotted field names in errors.
class Section
{
public:
  Section(const json& doc, std::string name, std::set<std::string> known)
    : name_(std::move(name))
  {
    if (auto const it = doc.find(name_); it != doc.end()) {
      if (!it->is_object()) {
        throw ConfigError(name_, "expected an object");
      }
      node_ = &*it;
      for (auto const& [key, value] : it->items()) {
        if (!known.contains(key)) {
          throw ConfigError(field(key), "unknown field");
        }
      }
    }
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  const json* find(const std::string& key) const
  {
    if (!node_) {
      return nullptr;
    }
    auto const it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) const
  {
    if (auto const* v = find(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) {
        throw ConfigError(field(key), "expected a finite number");
      }
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) const
  {
    if (auto const* v = find(key)) {
      if (!v->is_number_integer()) {
        throw ConfigError(field(key), "expected an integer");
      }
      out = v->get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) const
  {
    if (auto const* v = find(key)) {
      if (!v->is_boolean()) {
        throw ConfigError(field(key), "expected true or false");
      }
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) const
  {
    if (auto const* v = find(key)) {
      if (!v->is_string()) {
        throw ConfigError(field(key), "expected a string");
      }
      out = v->get<std::string>();
    }
  }

  void path(const std::string& key, fs::path& out, const fs::path& base) const
  {
    std::string text = out.string();
    string(key, text);
    fs::path p(text);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

private:
  std::string name_;
  const json* node_ = nullptr;
};

template <typename Fn>
void check(const std::string& field, Fn&& validate)
{
  try {
    validate();
  } catch (const DomainError& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

DaemonConfig parse_config(const json& doc, const fs::path& base_dir)
{
  if (!doc.is_object()) {
    throw ConfigError("config", "expected a JSON object at top level");
  }
  static const std::set<std::string> sections = { "device", "sensor", "soil", "controller",
                                                  "calibration", "storage", "server" };
  for (auto const& [key, value] : doc.items()) {
    if (!sections.contains(key)) {
      throw ConfigError(key, "unknown section");
    }
  }

  DaemonConfig cfg;

  Section const device(doc, "device", { "backend", "adc", "noise_sigma_v", "noise_seed", "pump_flow_lps" });
  std::string backend = "simulated";
  device.string("backend", backend);
  if (backend == "simulated") {
    cfg.backend = Backend::simulated;
  } else if (backend == "hardware") {
    cfg.backend = Backend::hardware;
  } else {
    throw ConfigError("device.backend", fmt::format("must be 'simulated' or 'hardware', got '{}'", backend));
  }
  device.number("noise_sigma_v", cfg.simulation.noise_sigma_v);
  device.integer("noise_seed", cfg.simulation.seed);
  device.number("pump_flow_lps", cfg.simulation.pump.flow_rate_lps);
  if (auto const* adc = device.find("adc")) {
    json const wrapped{ { "device.adc", *adc } };
    Section const a(wrapped, "device.adc", { "pga_full_scale", "channel", "mode", "data_rate" });
    a.number("pga_full_scale", cfg.adc.pga_full_scale);
    a.integer("channel", cfg.adc.mux_channel);
    a.integer("data_rate", cfg.adc.data_rate);
    std::string mode(device::to_string(cfg.adc.mode));
    a.string("mode", mode);
    check("device.adc.mode", [&] { cfg.adc.mode = device::adc_mode_from_string(mode); });
    if (cfg.adc.mode != device::AdcMode::single_shot) {
      throw ConfigError("device.adc.mode", "only single_shot conversion is supported");
    }
    check("device.adc", [&] { cfg.adc.validate(); });
  }
  cfg.simulation.probe_channel = cfg.adc.mux_channel;
  if (!(cfg.simulation.noise_sigma_v >= 0.0)) {
    throw ConfigError("device.noise_sigma_v", "must be non-negative");
  }
  if (!(cfg.simulation.pump.flow_rate_lps > 0.0)) {
    throw ConfigError("device.pump_flow_lps", "must be positive");
  }

  Section const sensor(doc, "sensor", { "eps_dry", "eps_water", "plate_area_m2", "plate_gap_m", "v_dry", "v_wet" });
  sensor.number("eps_dry", cfg.simulation.dielectric.eps_dry);
  sensor.number("eps_water", cfg.simulation.dielectric.eps_water);
  sensor.number("plate_area_m2", cfg.probe.plate_area_m2);
  sensor.number("plate_gap_m", cfg.probe.plate_gap_m);
  sensor.number("v_dry", cfg.simulation.transfer.v_dry);
  sensor.number("v_wet", cfg.simulation.transfer.v_wet);
  check("sensor", [&] {
    cfg.simulation.dielectric.validate();
    cfg.probe.validate();
    cfg.simulation.transfer.validate();
  });

  Section const soil(doc, "soil", { "decay_rate_per_s", "absorb_efficiency", "capacity_liters", "initial_theta", "time_scale" });
  soil.number("decay_rate_per_s", cfg.simulation.dynamics.decay_rate);
  soil.number("absorb_efficiency", cfg.simulation.dynamics.absorb_efficiency);
  soil.number("capacity_liters", cfg.simulation.capacity_liters);
  soil.number("initial_theta", cfg.simulation.initial_theta);
  soil.number("time_scale", cfg.time_scale);
  if (!(cfg.time_scale > 0.0)) {
    throw ConfigError("soil.time_scale", "must be positive");
  }
  check("soil", [&] { cfg.simulation.validate(); });

  if (auto const it = doc.find("controller"); it != doc.end()) {
    try {
      cfg.controller = control::merge_config(cfg.controller, *it);
    } catch (const ConfigError& e) {
      throw ConfigError("controller." + e.field(), e.message());
    }
  }

  Section const calib(doc, "calibration", { "profile_path", "n_samples", "label" });
  calib.path("profile_path", cfg.calibration.profile_path, base_dir);
  calib.integer("n_samples", cfg.calibration.n_samples);
  calib.string("label", cfg.calibration.label);
  if (cfg.calibration.n_samples < 1) {
    throw ConfigError("calibration.n_samples", "must be at least 1");
  }

  Section const storage(doc, "storage", { "history_path", "rotate_bytes", "keep_files", "fsync" });
  storage.path("history_path", cfg.storage.history_path, base_dir);
  storage.integer("rotate_bytes", cfg.storage.rotate_bytes);
  storage.integer("keep_files", cfg.storage.keep_files);
  storage.boolean("fsync", cfg.storage.fsync);
  if (cfg.storage.rotate_bytes < 1024) {
    throw ConfigError("storage.rotate_bytes", "must be at least 1024");
  }
  if (cfg.storage.keep_files < 1) {
    throw ConfigError("storage.keep_files", "must be at least 1");
  }

  Section const server(doc, "server", { "bind", "port", "static_dir" });
  server.string("bind", cfg.server.bind);
  server.integer("port", cfg.server.port);
  server.path("static_dir", cfg.server.static_dir, base_dir);
  if (cfg.server.port < 0 || cfg.server.port > 65535) {
    throw ConfigError("server.port", "must be in 0..65535");
  }

  return cfg;
}

json config_to_json(const DaemonConfig& cfg)
{
  return json{
    { "device",
      {
        { "backend", cfg.backend == Backend::simulated ? "simulated" : "hardware" },
        { "adc",
          {
            { "pga_full_scale", cfg.adc.pga_full_scale },
            { "channel", cfg.adc.mux_channel },
            { "mode", device::to_string(cfg.adc.mode) },
            { "data_rate", cfg.adc.data_rate },
          } },
        { "noise_sigma_v", cfg.simulation.noise_sigma_v },
        { "noise_seed", cfg.simulation.seed },
        { "pump_flow_lps", cfg.simulation.pump.flow_rate_lps },
      } },
    { "sensor",
      {
        { "eps_dry", cfg.simulation.dielectric.eps_dry },
        { "eps_water", cfg.simulation.dielectric.eps_water },
        { "plate_area_m2", cfg.probe.plate_area_m2 },
        { "plate_gap_m", cfg.probe.plate_gap_m },
        { "v_dry", cfg.simulation.transfer.v_dry },
        { "v_wet", cfg.simulation.transfer.v_wet },
      } },
    { "soil",
      {
        { "decay_rate_per_s", cfg.simulation.dynamics.decay_rate },
        { "absorb_efficiency", cfg.simulation.dynamics.absorb_efficiency },
        { "capacity_liters", cfg.simulation.capacity_liters },
        { "initial_theta", cfg.simulation.initial_theta },
        { "time_scale", cfg.time_scale },
      } },
    { "controller", json(cfg.controller) },
    { "calibration",
      {
        { "profile_path", cfg.calibration.profile_path.string() },
        { "n_samples", cfg.calibration.n_samples },
        { "label", cfg.calibration.label },
      } },
    { "storage",
      {
        { "history_path", cfg.storage.history_path.string() },
        { "rotate_bytes", cfg.storage.rotate_bytes },
        { "keep_files", cfg.storage.keep_files },
        { "fsync", cfg.storage.fsync },
      } },
    { "server",
      {
        { "bind", cfg.server.bind },
        { "port", cfg.server.port },
        { "static_dir", cfg.server.static_dir.string() },
      } },
  };
}

namespace {

json read_document(const fs::path& path)
{
  std::string text;
  try {
    text = read_file(path);
  } catch (const StorageError&) {
    throw ConfigError("config", fmt::format("cannot read config file '{}'", path.string()));
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

}  // namespace

DaemonConfig load_config(const fs::path& path)
{
  return parse_config(read_document(path), path.parent_path());
}

ConfigFile::ConfigFile(fs::path path, DaemonConfig config)
  : path_(std::move(path))
  , config_(std::move(config))
{
  std::error_code ec;
  if (fs::exists(path_, ec)) {
    document_ = read_document(path_);
  } else {
    document_ = config_to_json(config_);
  }
}

DaemonConfig ConfigFile::current() const
{
  std::lock_guard lock(mutex_);
  return config_;
}

void ConfigFile::store_controller(const control::ControllerConfig& controller)
{
  controller.validate();
  std::lock_guard lock(mutex_);
  json next = document_;
  next["controller"] = json(controller);
  write_file_atomic(path_, next.dump(2) + "\n");
  document_ = std::move(next);
  config_.controller = controller;
}

}  // namespace hydrad
