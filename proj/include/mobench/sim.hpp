#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mobench/device.hpp"

namespace mobench {

// Declarative scripted app. The file format is documented in docs/sim_apps.md.
struct SimTransition {
  std::string screen;
  std::string on;  // tap | long_press | swipe_up | swipe_down | swipe_left | swipe_right | back
  std::string target;  // node id; empty for back
  nlohmann::json effects = nlohmann::json::array();
  std::string next_screen;  // empty: stay
};

struct SimScreen {
  std::string id;
  std::optional<std::string> parent;
  nlohmann::json nodes = nlohmann::json::array();
};

struct SimApp {
  std::string app_id;
  std::string name;
  std::string package;
  std::string root_screen;
  std::map<std::string, nlohmann::json> fixtures;
  std::map<std::string, SimScreen> screens;
  std::vector<SimTransition> transitions;

  static SimApp from_json(const nlohmann::json& j);
  // Structural problems: dangling next screens, duplicate triggers, missing default fixture.
  std::vector<std::string> check() const;
};

class SimAppRegistry {
 public:
  static std::shared_ptr<const SimAppRegistry> load_dir(const std::filesystem::path& dir);

  void add(SimApp app);
  const SimApp* find(const std::string& app_id) const;
  const std::vector<SimApp>& apps() const { return apps_; }

 private:
  std::vector<SimApp> apps_;
};

inline constexpr const char* kHomeApp = "home";

class SimDevice : public Device {
 public:
  SimDevice(DeviceConfig cfg, std::shared_ptr<const SimAppRegistry> apps);

  Observation observe(bool with_screenshot) override;
  void reset(const std::string& app, const std::string& fixture = {}) override;

  const nlohmann::json& state() const { return state_; }
  const std::string& foreground() const { return app_; }
  const std::string& current_screen() const { return screen_; }

  // Renders the current tree without advancing the logical clock.
  RawUiTree render() const;

 protected:
  void execute(const GroundedAction& action) override;

 private:
  struct NodeMeta {
    std::string id;
    int item_index = -1;
    std::string item_list;
    std::string bind;
    bool editable = false;
    bool checkable_bind = false;
    bool live = true;
  };
  struct Rendered {
    RawUiTree tree;
    std::vector<NodeMeta> meta;  // indexed by node_id
  };

  Rendered render_full() const;
  void launch(const std::string& app_id);
  void go_home();
  void goto_screen(const std::string& screen);
  void hit(int x, int y, const std::string& trigger);
  bool fire(const std::string& on, const NodeMeta* meta);
  void apply_effects(const nlohmann::json& effects, const NodeMeta* meta);
  nlohmann::json& app_state();
  const SimApp& app_def() const;
  std::string now_hm() const;

  std::shared_ptr<const SimAppRegistry> apps_;
  nlohmann::json state_ = nlohmann::json::object();
  std::string app_ = kHomeApp;
  std::string screen_;
  std::optional<std::string> focus_bind_;
  std::string focus_key_;
  std::int64_t base_epoch_ms_ = 0;
  std::int64_t ticks_ = 0;
};

Image rasterize(const RawUiTree& tree);

}  // namespace mobench
