#include "mobench/device.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "mobench/errors.hpp"
#include "mobench/sim.hpp"

namespace mobench {

void DeviceConfig::validate() const {
  if (step_interval < 0) throw Error(ErrorKind::kConfig, "step_interval must be >= 0");
  if (xml_poll.attempts < 1) throw Error(ErrorKind::kConfig, "xml_poll.attempts must be >= 1");
  if (xml_poll.delay_ms < 0) throw Error(ErrorKind::kConfig, "xml_poll.delay_ms must be >= 0");
  if (screen_width <= 0 || screen_height <= 0) throw Error(ErrorKind::kConfig, "screen dimensions must be positive");
}

void Device::perform(const GroundedAction& action) {
  if (std::holds_alternative<grounded::Done>(action))
    throw Error(ErrorKind::kPrecondition, "Done is handled by the agent loop, not the device");
  execute(action);
  if (cfg_.step_interval > 0)
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.step_interval));
}

// ---- subprocess -----------------------------------------------------------------

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += '\'';
  return out;
}

}  // namespace

CommandResult SubprocessRunner::run(const std::vector<std::string>& argv) {
  std::string cmd;
  for (const auto& a : argv) {
    if (!cmd.empty()) cmd += ' ';
    cmd += shell_quote(a);
  }
  cmd += " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {127, {}};
  CommandResult r;
  char buf[8192];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
  return r;
}

// ---- adb backend ----------------------------------------------------------------

namespace {

constexpr const char* kDumpPath = "/sdcard/mobench_dump.xml";

class AdbDevice : public Device {
 public:
  AdbDevice(DeviceConfig cfg, std::shared_ptr<CommandRunner> runner, std::string serial)
      : Device(std::move(cfg)), runner_(std::move(runner)), serial_(std::move(serial)) {}

  void apply_environment() {
    const auto& cfg = config();
    if (cfg.fixed_time) {
      // toybox date wants MMDDhhmmYYYY.ss
      const std::string& t = *cfg.fixed_time;
      std::string stamp;
      if (t.size() >= 16) {
        stamp = t.substr(5, 2) + t.substr(8, 2) + t.substr(11, 2) + t.substr(14, 2) + t.substr(0, 4) + "." +
                (t.size() >= 19 ? t.substr(17, 2) : "00");
      }
      adb({"shell", "settings", "put", "global", "auto_time", "0"});
      if (stamp.empty() || adb({"shell", "su", "0", "date", stamp}).exit_code != 0) {
        spdlog::warn("adb {}: could not set device time; recorded only", serial_);
        unapplied_.push_back("fixed_time");
      }
    }
    if (cfg.fixed_geo) {
      auto r = adb({"emu", "geo", "fix", std::to_string(cfg.fixed_geo->lon), std::to_string(cfg.fixed_geo->lat)});
      if (r.exit_code != 0) {
        spdlog::warn("adb {}: could not set geolocation; recorded only", serial_);
        unapplied_.push_back("fixed_geo");
      }
    }
  }

  Observation observe(bool with_screenshot) override {
    const auto& poll = config().xml_poll;
    Observation obs;
    std::string xml;
    for (int attempt = 0; attempt < poll.attempts; ++attempt) {
      auto dump = adb({"shell", "uiautomator", "dump", kDumpPath});
      if (dump.exit_code == 0) {
        auto cat = adb({"exec-out", "cat", kDumpPath});
        if (cat.exit_code == 0 && cat.out.find("<hierarchy") != std::string::npos) {
          xml = std::move(cat.out);
          break;
        }
      }
      ++obs.xml_retries;
      spdlog::info("adb {}: hierarchy dump attempt {} failed", serial_, attempt + 1);
      if (attempt + 1 < poll.attempts && poll.delay_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(poll.delay_ms));
    }
    if (xml.empty())
      throw Error(ErrorKind::kXmlAcquisitionFailed,
                  "uiautomator dump failed " + std::to_string(poll.attempts) + " times on " + serial_);
    obs.tree = parse_hierarchy_xml(xml, config().screen_width, config().screen_height);
    obs.capture_timestamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    obs.tree.capture_timestamp = obs.capture_timestamp;
    obs.tree.for_each([&](const UiNode& n, int) {
      if (obs.foreground_app.empty() && !n.package.empty() && n.package != "com.android.systemui")
        obs.foreground_app = n.package;
    });
    if (with_screenshot) {
      auto shot = adb({"exec-out", "screencap", "-p"});
      if (shot.exit_code != 0) throw Error(ErrorKind::kExecutionFailed, "screencap failed");
      obs.screenshot = decode_png(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(shot.out.data()), shot.out.size()));
    }
    return obs;
  }

  void reset(const std::string& app, const std::string&) override {
    auto path = adb({"shell", "pm", "path", app});
    if (path.exit_code != 0 || path.out.find("package:") == std::string::npos)
      throw Error(ErrorKind::kUnknownApp, app);
    check(adb({"shell", "am", "force-stop", app}), "force-stop");
    check(adb({"shell", "monkey", "-p", app, "-c", "android.intent.category.LAUNCHER", "1"}), "launch");
  }

 protected:
  void execute(const GroundedAction& action) override {
    auto s = [](int v) { return std::to_string(v); };
    if (auto* t = std::get_if<grounded::TapAt>(&action)) {
      check(adb({"shell", "input", "tap", s(t->x), s(t->y)}), "tap");
    } else if (auto* w = std::get_if<grounded::SwipeFromTo>(&action)) {
      check(adb({"shell", "input", "swipe", s(w->x1), s(w->y1), s(w->x2), s(w->y2), s(w->duration_ms)}), "swipe");
    } else if (auto* l = std::get_if<grounded::LongPressAt>(&action)) {
      check(adb({"shell", "input", "swipe", s(l->x), s(l->y), s(l->x), s(l->y), s(l->duration_ms)}), "long press");
    } else if (auto* ty = std::get_if<grounded::TypeText>(&action)) {
      // ADB keyboard: the whole string arrives as one input event.
      check(adb({"shell", "am", "broadcast", "-a", "ADB_INPUT_B64", "--es", "msg", base64_encode(ty->text)}), "type");
    } else if (std::holds_alternative<grounded::KeyHome>(action)) {
      check(adb({"shell", "input", "keyevent", "KEYCODE_HOME"}), "home");
    } else if (std::holds_alternative<grounded::KeyBack>(action)) {
      check(adb({"shell", "input", "keyevent", "KEYCODE_BACK"}), "back");
    }
  }

 private:
  CommandResult adb(std::vector<std::string> args) {
    std::vector<std::string> argv{config().adb_path, "-s", serial_};
    argv.insert(argv.end(), args.begin(), args.end());
    return runner_->run(argv);
  }

  static void check(const CommandResult& r, const char* what) {
    if (r.exit_code != 0)
      throw Error(ErrorKind::kExecutionFailed, std::string(what) + " exited with " + std::to_string(r.exit_code));
  }

  std::shared_ptr<CommandRunner> runner_;
  std::string serial_;
};

std::vector<std::string> attached_devices(const DeviceConfig& cfg, CommandRunner& runner) {
  auto r = runner.run({cfg.adb_path, "devices"});
  if (r.exit_code == 127 || r.out.find("List of devices") == std::string::npos)
    throw Error(ErrorKind::kAdbUnavailable, "'" + cfg.adb_path + " devices' did not run");
  std::vector<std::string> serials;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    std::string state = line.substr(tab + 1);
    while (!state.empty() && std::isspace(static_cast<unsigned char>(state.back()))) state.pop_back();
    if (state == "device") serials.push_back(line.substr(0, tab));
  }
  return serials;
}

}  // namespace

DeviceHandle setup(const DeviceConfig& cfg, std::shared_ptr<CommandRunner> runner) {
  cfg.validate();
  if (cfg.backend != Backend::kAdb) throw Error(ErrorKind::kConfig, "command runner given for a sim backend");
  auto serials = attached_devices(cfg, *runner);
  std::string serial;
  if (!cfg.serial.empty()) {
    if (std::find(serials.begin(), serials.end(), cfg.serial) == serials.end())
      throw Error(ErrorKind::kDeviceNotFound, "no attached device " + cfg.serial);
    serial = cfg.serial;
  } else if (serials.empty()) {
    throw Error(ErrorKind::kDeviceNotFound, "no device attached");
  } else if (serials.size() > 1) {
    throw Error(ErrorKind::kMultipleDevices, std::to_string(serials.size()) + " devices attached; pass a serial");
  } else {
    serial = serials.front();
  }
  auto dev = std::make_unique<AdbDevice>(cfg, std::move(runner), serial);
  dev->apply_environment();
  return dev;
}

DeviceHandle setup(const DeviceConfig& cfg, std::shared_ptr<const SimAppRegistry> apps) {
  cfg.validate();
  if (cfg.backend != Backend::kSim) throw Error(ErrorKind::kConfig, "app registry given for an adb backend");
  return std::make_unique<SimDevice>(cfg, std::move(apps));
}

DeviceHandle setup(const DeviceConfig& cfg) {
  if (cfg.backend == Backend::kAdb) return setup(cfg, std::make_shared<SubprocessRunner>());
  return setup(cfg, SimAppRegistry::load_dir(cfg.sim_apps_dir));
}

}  // namespace mobench
