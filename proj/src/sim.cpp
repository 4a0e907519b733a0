#include "mobench/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "mobench/errors.hpp"

namespace mobench {

using nlohmann::json;

namespace {

constexpr int kRefWidth = 1080;
constexpr int kRefHeight = 2400;
constexpr int kStatusBarRef = 96;

std::string expand_class(const std::string& c) {
  if (c.empty()) return "android.view.View";
  if (c.find('.') != std::string::npos) return c;
  if (c == "View") return "android.view.View";
  return "android.widget." + c;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.'))
    if (!part.empty()) out.push_back(part);
  return out;
}

bool is_index(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

const json* lookup(const json& root, const std::vector<std::string>& parts, std::size_t from = 0) {
  const json* cur = &root;
  for (std::size_t i = from; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (cur->is_object()) {
      auto it = cur->find(p);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array() && is_index(p)) {
      auto idx = std::stoul(p);
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else {
      return nullptr;
    }
  }
  return cur;
}

json& lookup_mut(json& root, const std::string& path) {
  json* cur = &root;
  for (const auto& p : split_path(path)) {
    if (cur->is_array() && is_index(p)) {
      auto idx = std::stoul(p);
      if (idx >= cur->size()) throw Error(ErrorKind::kConfig, "index out of range in path " + path);
      cur = &(*cur)[idx];
    } else {
      if (cur->is_null()) *cur = json::object();
      if (!cur->is_object()) throw Error(ErrorKind::kConfig, "path " + path + " crosses a non-object");
      cur = &(*cur)[p];
    }
  }
  return *cur;
}

std::string to_display(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e15) return std::to_string(static_cast<long long>(d));
    std::ostringstream os;
    os << d;
    return os.str();
  }
  if (v.is_null()) return "";
  return v.dump();
}

bool truthy(const json* v) {
  if (!v || v->is_null()) return false;
  if (v->is_boolean()) return v->get<bool>();
  if (v->is_number()) return v->get<double>() != 0;
  if (v->is_string()) {
    const auto& s = v->get_ref<const std::string&>();
    return !s.empty() && s != "false" && s != "0";
  }
  return !v->empty();
}

struct Ctx {
  const json* app = nullptr;
  const json* sys = nullptr;
  const json* item = nullptr;
  int index = -1;
};

const json* resolve(const Ctx& ctx, const std::string& path, json& scratch) {
  auto parts = split_path(path);
  if (parts.empty()) return nullptr;
  if (parts[0] == "item") return ctx.item ? lookup(*ctx.item, parts, 1) : nullptr;
  if (parts[0] == "sys") return lookup(*ctx.sys, parts, 1);
  if (parts[0] == "index") {
    scratch = ctx.index;
    return &scratch;
  }
  return lookup(*ctx.app, parts);
}

std::string render_template(const std::string& tpl, const Ctx& ctx) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] == '{') {
      auto close = tpl.find('}', i);
      if (close != std::string::npos) {
        json scratch;
        const json* v = resolve(ctx, tpl.substr(i + 1, close - i - 1), scratch);
        if (v) out += to_display(*v);
        i = close;
        continue;
      }
    }
    out += tpl[i];
  }
  return out;
}

// Strings that are exactly one "{path}" keep the referenced value's type.
json render_value(const json& v, const Ctx& ctx) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.size() > 2 && s.front() == '{' && s.back() == '}' && s.find('{', 1) == std::string::npos) {
      json scratch;
      const json* r = resolve(ctx, s.substr(1, s.size() - 2), scratch);
      return r ? *r : json();
    }
    return render_template(s, ctx);
  }
  if (v.is_object()) {
    json out = json::object();
    for (auto it = v.begin(); it != v.end(); ++it) out[it.key()] = render_value(it.value(), ctx);
    return out;
  }
  return v;
}

bool flag(const json& spec, const char* key, const Ctx& ctx) {
  auto it = spec.find(key);
  if (it == spec.end()) return false;
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_string()) {
    json scratch;
    return truthy(resolve(ctx, it->get<std::string>(), scratch));
  }
  return false;
}

Rect scaled(const json& b, int w, int h, int dy) {
  auto sx = [&](int v) { return static_cast<int>(static_cast<long long>(v) * w / kRefWidth); };
  auto sy = [&](int v) { return static_cast<int>(static_cast<long long>(v) * h / kRefHeight); };
  return Rect{sx(b.at(0).get<int>()), sy(b.at(1).get<int>() + dy), sx(b.at(2).get<int>()), sy(b.at(3).get<int>() + dy)};
}

std::int64_t parse_epoch_ms(const std::string& iso) {
  std::tm tm{};
  std::istringstream is(iso);
  is >> std::get_time(&tm, "%Y-%m-%dT%H:%M");
  if (is.fail()) throw Error(ErrorKind::kConfig, "bad fixed_time '" + iso + "'");
  int sec = 0;
  if (is.peek() == ':') {
    is.get();
    is >> sec;
  }
  tm.tm_sec = sec;
  return static_cast<std::int64_t>(timegm(&tm)) * 1000;
}

}  // namespace

// ---- definitions ---------------------------------------------------------------

SimApp SimApp::from_json(const json& j) {
  SimApp app;
  app.app_id = j.at("app_id").get<std::string>();
  app.name = j.value("name", app.app_id);
  app.package = j.value("package", "com.sim." + app.app_id);
  app.root_screen = j.at("root").get<std::string>();
  if (auto it = j.find("fixtures"); it != j.end())
    for (auto f = it->begin(); f != it->end(); ++f) app.fixtures[f.key()] = f.value();
  if (!app.fixtures.count("default")) app.fixtures["default"] = json::object();
  for (auto s = j.at("screens").begin(); s != j.at("screens").end(); ++s) {
    SimScreen screen;
    screen.id = s.key();
    if (auto p = s->find("parent"); p != s->end() && p->is_string()) screen.parent = p->get<std::string>();
    screen.nodes = s->value("nodes", json::array());
    app.screens[screen.id] = std::move(screen);
  }
  for (const auto& t : j.value("transitions", json::array())) {
    SimTransition tr;
    tr.screen = t.at("screen").get<std::string>();
    tr.on = t.value("on", "tap");
    tr.target = t.value("target", "");
    tr.effects = t.value("effects", json::array());
    tr.next_screen = t.value("goto", "");
    app.transitions.push_back(std::move(tr));
  }
  return app;
}

std::vector<std::string> SimApp::check() const {
  std::vector<std::string> problems;
  if (!screens.count(root_screen)) problems.push_back(app_id + ": root screen '" + root_screen + "' undefined");
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& t : transitions) {
    if (!screens.count(t.screen)) problems.push_back(app_id + ": transition on unknown screen '" + t.screen + "'");
    if (!t.next_screen.empty() && !screens.count(t.next_screen))
      problems.push_back(app_id + ": transition goes to unknown screen '" + t.next_screen + "'");
    if (!seen.insert({t.screen, t.on, t.target}).second)
      problems.push_back(app_id + ": duplicate trigger " + t.screen + "/" + t.on + "/" + t.target);
  }
  for (const auto& [id, s] : screens)
    if (s.parent && !screens.count(*s.parent))
      problems.push_back(app_id + ": screen '" + id + "' has unknown parent '" + *s.parent + "'");
  return problems;
}

std::shared_ptr<const SimAppRegistry> SimAppRegistry::load_dir(const std::filesystem::path& dir) {
  auto reg = std::make_shared<SimAppRegistry>();
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::kConfig, "no sim app directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      j = json::parse(in);
      reg->add(SimApp::from_json(j));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, f.string() + ": " + e.what());
    }
  }
  return reg;
}

void SimAppRegistry::add(SimApp app) {
  auto problems = app.check();
  if (!problems.empty()) throw Error(ErrorKind::kConfig, problems.front());
  if (find(app.app_id)) throw Error(ErrorKind::kConfig, "duplicate app " + app.app_id);
  apps_.push_back(std::move(app));
}

const SimApp* SimAppRegistry::find(const std::string& app_id) const {
  for (const auto& a : apps_)
    if (a.app_id == app_id) return &a;
  return nullptr;
}

// ---- device ---------------------------------------------------------------------

SimDevice::SimDevice(DeviceConfig cfg, std::shared_ptr<const SimAppRegistry> apps)
    : Device(std::move(cfg)), apps_(std::move(apps)) {
  base_epoch_ms_ = parse_epoch_ms(config().fixed_time.value_or("2024-01-01T08:00"));
  for (const auto& a : apps_->apps()) state_[a.app_id] = a.fixtures.at("default");
  state_["system"] = json{{"battery", 100}};
}

std::string SimDevice::now_hm() const {
  std::time_t t = static_cast<std::time_t>(base_epoch_ms_ / 1000);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << tm.tm_hour << ':' << std::setw(2) << std::setfill('0') << tm.tm_min;
  return os.str();
}

json& SimDevice::app_state() { return state_[app_]; }

const SimApp& SimDevice::app_def() const { return *apps_->find(app_); }

void SimDevice::reset(const std::string& app, const std::string& fixture) {
  const SimApp* def = apps_->find(app);
  if (!def) throw Error(ErrorKind::kUnknownApp, app);
  const std::string fx = fixture.empty() ? "default" : fixture;
  auto it = def->fixtures.find(fx);
  if (it == def->fixtures.end()) throw Error(ErrorKind::kConfig, "app " + app + " has no fixture '" + fx + "'");
  for (const auto& a : apps_->apps()) state_[a.app_id] = a.fixtures.at("default");
  state_[app] = it->second;
  state_["system"] = json{{"battery", 100}};
  ticks_ = 0;
  launch(app);
}

void SimDevice::launch(const std::string& app_id) {
  app_ = app_id;
  goto_screen(app_def().root_screen);
}

void SimDevice::go_home() {
  app_ = kHomeApp;
  screen_.clear();
  focus_bind_.reset();
  focus_key_.clear();
}

void SimDevice::goto_screen(const std::string& screen) {
  screen_ = screen;
  focus_bind_.reset();
  focus_key_.clear();
}

SimDevice::Rendered SimDevice::render_full() const {
  const int w = config().screen_width;
  const int h = config().screen_height;
  Rendered out;
  out.tree.screen_width = w;
  out.tree.screen_height = h;
  int next_id = 0;

  const bool home = app_ == kHomeApp;
  const SimApp* def = home ? nullptr : apps_->find(app_);
  const std::string package = home ? "com.sim.launcher" : def->package;

  json sys = {{"time", now_hm()}, {"battery", state_.at("system").value("battery", 100)}};
  const json empty_obj = json::object();

  auto make = [&](UiNode& n, NodeMeta meta) {
    n.node_id = next_id++;
    n.package = package;
    n.enabled = true;
    out.meta.push_back(std::move(meta));
  };

  UiNode& root = out.tree.root;
  make(root, {});
  root.class_name = "android.widget.FrameLayout";
  root.bounds = Rect{0, 0, w, h};

  const int bar = kStatusBarRef * h / kRefHeight;
  {
    UiNode status;
    make(status, {});
    status.class_name = "android.widget.LinearLayout";
    status.resource_id = "com.android.systemui:id/status_bar";
    status.package = "com.android.systemui";
    status.bounds = Rect{0, 0, w, bar};
    UiNode clock;
    make(clock, {});
    clock.class_name = "android.widget.TextView";
    clock.resource_id = "com.android.systemui:id/clock";
    clock.package = "com.android.systemui";
    clock.text = now_hm();
    clock.bounds = Rect{w / 20, bar / 4, w / 5, bar * 3 / 4};
    status.children.push_back(std::move(clock));
    const json& settings = state_.contains("settings") ? state_.at("settings") : empty_obj;
    if (truthy(settings.contains("battery_percentage") ? &settings.at("battery_percentage") : nullptr)) {
      UiNode pct;
      make(pct, {});
      pct.class_name = "android.widget.TextView";
      pct.resource_id = "com.android.systemui:id/battery_percentage";
      pct.package = "com.android.systemui";
      pct.text = to_display(sys["battery"]) + "%";
      pct.bounds = Rect{w * 4 / 5, bar / 4, w * 19 / 20, bar * 3 / 4};
      status.children.push_back(std::move(pct));
    }
    root.children.push_back(std::move(status));
  }

  UiNode content;
  make(content, {});
  content.class_name = "android.widget.FrameLayout";
  content.resource_id = package + ":id/content";
  content.bounds = Rect{0, bar, w, h};

  if (home) {
    const auto& apps = apps_->apps();
    for (std::size_t i = 0; i < apps.size(); ++i) {
      const int col = static_cast<int>(i % 4), row = static_cast<int>(i / 4);
      UiNode icon;
      NodeMeta meta;
      meta.id = "app_icon:" + apps[i].app_id;
      make(icon, std::move(meta));
      icon.class_name = "android.widget.TextView";
      icon.resource_id = "com.sim.launcher:id/app_icon";
      icon.text = apps[i].name;
      icon.content_desc = apps[i].name;
      icon.clickable = true;
      icon.focusable = true;
      icon.bounds = scaled(json::array({30 + col * 262, 300 + row * 320, 262 + col * 262, 560 + row * 320}), w, h, 0);
      content.children.push_back(std::move(icon));
    }
  } else {
    const json& app = state_.at(app_);
    std::function<void(const json&, UiNode&, Ctx, const std::string&, int, int)> build;
    build = [&](const json& spec, UiNode& parent, Ctx ctx, const std::string& list, int item_index, int dy) {
      if (spec.contains("if") && !flag(spec, "if", ctx)) return;
      if (spec.contains("unless") && flag(spec, "unless", ctx)) return;
      if (auto rep = spec.find("repeat"); rep != spec.end()) {
        json scratch;
        const std::string list_path = rep->at("list").get<std::string>();
        const json* items = resolve(ctx, list_path, scratch);
        if (!items || !items->is_array()) return;
        int start = 0;
        if (auto s = rep->find("start"); s != rep->end()) {
          const json* sv = resolve(ctx, s->get<std::string>(), scratch);
          if (sv && sv->is_number()) start = sv->get<int>();
        }
        const int max = rep->value("max", 1000);
        const int step = rep->value("dy", 0);
        json inner = spec;
        inner.erase("repeat");
        for (int i = std::max(0, start); i < static_cast<int>(items->size()) && i - start < max; ++i) {
          Ctx c = ctx;
          c.item = &(*items)[static_cast<std::size_t>(i)];
          c.index = i;
          build(inner, parent, c, list_path, i, dy + step * (i - start));
        }
        return;
      }
      UiNode n;
      NodeMeta meta;
      meta.id = spec.value("id", "");
      meta.item_index = item_index;
      meta.item_list = list;
      meta.bind = spec.value("bind", "");
      n.class_name = expand_class(spec.value("class", "View"));
      if (!meta.id.empty()) n.resource_id = package + ":id/" + meta.id;
      n.bounds = scaled(spec.at("bounds"), w, h, dy);
      n.clickable = flag(spec, "clickable", ctx);
      n.long_clickable = flag(spec, "long_clickable", ctx);
      n.scrollable = flag(spec, "scrollable", ctx);
      n.checkable = flag(spec, "checkable", ctx);
      n.content_desc = render_template(spec.value("desc", ""), ctx);
      meta.editable = is_editable_class(n.class_name);
      n.focusable = flag(spec, "focusable", ctx) || meta.editable;
      if (meta.editable && !meta.bind.empty()) {
        json scratch;
        const json* v = resolve(ctx, meta.bind, scratch);
        n.text = v ? to_display(*v) : "";
        if (n.content_desc.empty()) n.content_desc = spec.value("hint", "");
        std::string key = meta.id + "#" + std::to_string(item_index);
        n.focused = focus_bind_ && focus_key_ == key;
      } else {
        n.text = render_template(spec.value("text", ""), ctx);
      }
      if (n.checkable) {
        if (!meta.bind.empty()) {
          json scratch;
          n.checked = truthy(resolve(ctx, meta.bind, scratch));
          meta.checkable_bind = true;
        } else {
          n.checked = flag(spec, "checked", ctx);
        }
      }
      make(n, std::move(meta));
      for (const auto& child : spec.value("children", json::array())) build(child, n, ctx, list, item_index, dy);
      parent.children.push_back(std::move(n));
    };
    Ctx ctx{&app, &sys, nullptr, -1};
    for (const auto& spec : def->screens.at(screen_).nodes) build(spec, content, ctx, "", -1, 0);
  }
  root.children.push_back(std::move(content));

  // Pre-order ids were assigned at creation, which is pre-order already; clamp to screen.
  std::function<void(UiNode&)> clamp = [&](UiNode& n) {
    n.bounds.left = std::clamp(n.bounds.left, 0, w);
    n.bounds.right = std::clamp(n.bounds.right, n.bounds.left, w);
    n.bounds.top = std::clamp(n.bounds.top, 0, h);
    n.bounds.bottom = std::clamp(n.bounds.bottom, n.bounds.top, h);
    for (auto& c : n.children) clamp(c);
  };
  clamp(root);
  return out;
}

RawUiTree SimDevice::render() const { return render_full().tree; }

Observation SimDevice::observe(bool with_screenshot) {
  Observation obs;
  obs.tree = render();
  obs.capture_timestamp = base_epoch_ms_ + 1000 * ++ticks_;
  obs.tree.capture_timestamp = obs.capture_timestamp;
  obs.foreground_app = app_;
  obs.state = state_;
  if (with_screenshot) obs.screenshot = rasterize(obs.tree);
  return obs;
}

bool SimDevice::fire(const std::string& on, const NodeMeta* meta) {
  if (app_ == kHomeApp) return false;
  const std::string target = meta ? meta->id : "";
  for (const auto& t : app_def().transitions) {
    if (t.screen != screen_ || t.on != on || t.target != target) continue;
    apply_effects(t.effects, meta);
    if (!t.next_screen.empty()) goto_screen(t.next_screen);
    return true;
  }
  return false;
}

void SimDevice::apply_effects(const json& effects, const NodeMeta* meta) {
  json& app = app_state();
  json sys = {{"time", now_hm()}};
  const json* item = nullptr;
  int index = meta ? meta->item_index : -1;
  if (meta && index >= 0) {
    json scratch;
    Ctx c{&app, &sys, nullptr, -1};
    const json* list = resolve(c, meta->item_list, scratch);
    if (list && list->is_array() && index < static_cast<int>(list->size())) item = &(*list)[static_cast<std::size_t>(index)];
  }
  // Effects may reallocate the item's list; work from a copy.
  const json item_copy = item ? *item : json();
  Ctx ctx{&app, &sys, item ? &item_copy : nullptr, index};

  for (const auto& e : effects) {
    const std::string op = e.at("op").get<std::string>();
    const std::string path = e.value("path", "");
    if (op == "set") {
      json v = render_value(e.at("value"), ctx);
      lookup_mut(app, path) = std::move(v);
    } else if (op == "toggle") {
      json& v = lookup_mut(app, path);
      v = !truthy(&v);
    } else if (op == "incr") {
      json& v = lookup_mut(app, path);
      long long cur = v.is_number() ? v.get<long long>() : 0;
      cur += e.value("by", 1);
      if (e.contains("min")) cur = std::max(cur, e.at("min").get<long long>());
      if (e.contains("max")) {
        const auto& mx = e.at("max");
        long long bound = 0;
        if (mx.is_number()) {
          bound = mx.get<long long>();
        } else {
          json scratch;
          const json* r = resolve(ctx, mx.get<std::string>(), scratch);
          bound = r && r->is_array() ? static_cast<long long>(r->size()) + e.value("max_offset", 0)
                                     : (r && r->is_number() ? r->get<long long>() : 0);
        }
        cur = std::min(cur, bound);
      }
      if (e.contains("min")) cur = std::max(cur, e.at("min").get<long long>());
      v = cur;
    } else if (op == "append") {
      json& list = lookup_mut(app, path);
      if (!list.is_array()) list = json::array();
      list.push_back(render_value(e.at("item"), ctx));
    } else if (op == "remove_item") {
      json& list = lookup_mut(app, path);
      if (list.is_array() && index >= 0 && index < static_cast<int>(list.size())) list.erase(static_cast<std::size_t>(index));
    } else if (op == "set_item" || op == "toggle_item") {
      json& list = lookup_mut(app, path);
      if (!list.is_array() || index < 0 || index >= static_cast<int>(list.size())) continue;
      json& field = list[static_cast<std::size_t>(index)][e.at("field").get<std::string>()];
      if (op == "set_item") field = render_value(e.at("value"), ctx);
      else field = !truthy(&field);
    } else if (op == "clear") {
      for (const auto& p : e.at("paths")) lookup_mut(app, p.get<std::string>()) = "";
    } else {
      throw Error(ErrorKind::kConfig, "unknown effect op '" + op + "'");
    }
  }
}

void SimDevice::hit(int x, int y, const std::string& trigger) {
  Rendered r = render_full();
  std::vector<const UiNode*> hits;
  r.tree.for_each([&](const UiNode& n, int) {
    if (n.visible && !n.bounds.empty() && n.bounds.contains(x, y)) hits.push_back(&n);
  });
  for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
    const NodeMeta& meta = r.meta[static_cast<std::size_t>((*it)->node_id)];
    if (meta.id.empty()) continue;
    if (app_ == kHomeApp) {
      if (trigger == "tap" && meta.id.rfind("app_icon:", 0) == 0) {
        launch(meta.id.substr(9));
        return;
      }
      continue;
    }
    if (fire(trigger, &meta)) return;
    if (trigger == "tap" && meta.editable && !meta.bind.empty()) {
      focus_bind_ = meta.bind;
      focus_key_ = meta.id + "#" + std::to_string(meta.item_index);
      return;
    }
    if (trigger == "tap" && meta.checkable_bind) {
      json& v = lookup_mut(app_state(), meta.bind);
      v = !truthy(&v);
      return;
    }
  }
}

void SimDevice::execute(const GroundedAction& action) {
  if (auto* t = std::get_if<grounded::TapAt>(&action)) {
    hit(t->x, t->y, "tap");
  } else if (auto* l = std::get_if<grounded::LongPressAt>(&action)) {
    hit(l->x, l->y, "long_press");
  } else if (auto* s = std::get_if<grounded::SwipeFromTo>(&action)) {
    const int dx = s->x2 - s->x1, dy = s->y2 - s->y1;
    std::string dir;
    if (std::abs(dx) > std::abs(dy)) dir = dx < 0 ? "swipe_left" : "swipe_right";
    else dir = dy < 0 ? "swipe_up" : "swipe_down";
    if (dx != 0 || dy != 0) hit(s->x1, s->y1, dir);
  } else if (auto* ty = std::get_if<grounded::TypeText>(&action)) {
    if (!focus_bind_) throw Error(ErrorKind::kNoFocusedField, "no focused editable field");
    json& v = lookup_mut(app_state(), *focus_bind_);
    v = to_display(v) + ty->text;
  } else if (std::holds_alternative<grounded::KeyHome>(action)) {
    go_home();
  } else if (std::holds_alternative<grounded::KeyBack>(action)) {
    if (app_ == kHomeApp) return;
    if (fire("back", nullptr)) return;
    const auto& screen = app_def().screens.at(screen_);
    if (screen.parent) goto_screen(*screen.parent);
    else go_home();
  }
}

// ---- screenshots -----------------------------------------------------------------

Image rasterize(const RawUiTree& tree) {
  Image img(tree.screen_width, tree.screen_height, Rgba{250, 250, 250, 255});
  const int scale = std::max(1, tree.screen_width / 270);
  tree.for_each([&](const UiNode& n, int depth) {
    if (!n.visible || n.bounds.empty()) return;
    if (depth == 1 && n.bounds.top == 0) img.fill_rect(n.bounds, Rgba{40, 40, 40, 255});
    if (n.clickable || n.scrollable || is_editable_class(n.class_name)) {
      img.fill_rect(n.bounds, n.checked ? Rgba{200, 230, 255, 255} : Rgba{235, 235, 235, 255});
      img.stroke_rect(n.bounds, 2, Rgba{150, 150, 150, 255});
    }
    const std::string& label = !n.text.empty() ? n.text : n.content_desc;
    if (!label.empty() && (n.children.empty() || !n.text.empty())) {
      const Rgba ink = n.bounds.top == 0 ? Rgba{255, 255, 255, 255} : Rgba{20, 20, 20, 255};
      const int y = n.bounds.center_y() - text_height(scale) / 2;
      draw_text(img, n.bounds.left + 4 * scale, y, label, scale, ink);
    }
  });
  return img;
}

}  // namespace mobench
