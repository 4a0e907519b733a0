#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mobench/actions.hpp"
#include "mobench/image.hpp"
#include "mobench/ui_tree.hpp"

namespace mobench {

struct Observation {
  RawUiTree tree;
  std::optional<Image> screenshot;
  std::string foreground_app;
  std::int64_t capture_timestamp = 0;
  // Key-value store of every simulated app; absent on real devices.
  std::optional<nlohmann::json> state;
  // Number of failed hierarchy dumps before this one succeeded.
  int xml_retries = 0;
};

enum class Backend { kAdb, kSim };

struct XmlPoll {
  int attempts = 3;
  int delay_ms = 500;
};

struct GeoPoint {
  double lat = 0;
  double lon = 0;
};

struct DeviceConfig {
  Backend backend = Backend::kSim;
  std::string serial;
  int screen_width = 1080;
  int screen_height = 2400;
  // Seconds slept after each action. Zero is accepted for offline runs.
  double step_interval = 3.0;
  // "YYYY-MM-DDTHH:MM[:SS]"
  std::optional<std::string> fixed_time;
  std::optional<GeoPoint> fixed_geo;
  XmlPoll xml_poll;
  std::filesystem::path sim_apps_dir;
  std::string adb_path = "adb";

  void validate() const;
};

class Device {
 public:
  explicit Device(DeviceConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Device() = default;
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  const DeviceConfig& config() const { return cfg_; }
  ScreenSize screen() const { return {cfg_.screen_width, cfg_.screen_height}; }

  virtual Observation observe(bool with_screenshot) = 0;

  // Executes the action, then waits step_interval. Done is rejected.
  void perform(const GroundedAction& action);

  // Restores the initial environment and foregrounds `app`. An empty fixture
  // selects the app's default initial state.
  virtual void reset(const std::string& app, const std::string& fixture = {}) = 0;

  // Settings the device could not apply ("fixed_time", "fixed_geo"); recorded only.
  const std::vector<std::string>& unapplied_settings() const { return unapplied_; }

 protected:
  virtual void execute(const GroundedAction& action) = 0;
  std::vector<std::string> unapplied_;

 private:
  DeviceConfig cfg_;
};

using DeviceHandle = std::unique_ptr<Device>;

// ---- ADB plumbing -------------------------------------------------------------

struct CommandResult {
  int exit_code = 0;
  std::string out;
};

class CommandRunner {
 public:
  virtual ~CommandRunner() = default;
  virtual CommandResult run(const std::vector<std::string>& argv) = 0;
};

// Runs commands through /bin/sh; exit code 127 means the binary is missing.
class SubprocessRunner : public CommandRunner {
 public:
  CommandResult run(const std::vector<std::string>& argv) override;
};

class SimAppRegistry;

DeviceHandle setup(const DeviceConfig& cfg);
DeviceHandle setup(const DeviceConfig& cfg, std::shared_ptr<CommandRunner> runner);
DeviceHandle setup(const DeviceConfig& cfg, std::shared_ptr<const SimAppRegistry> apps);

}  // namespace mobench
