#include "mobench/recorder.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "mobench/bench_runner.hpp"
#include "mobench/errors.hpp"
#include "mobench/image.hpp"
#include "mobench/som_overlay.hpp"

namespace mobench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- gestures ------------------------------------------------------------------------

Gesture classify_gesture(const std::vector<TouchEvent>& events, const GestureParams& params) {
  if (events.size() < 2 || events.front().kind != TouchKind::kDown || events.back().kind != TouchKind::kUp)
    throw Error(ErrorKind::kPrecondition, "a gesture starts with down and ends with up");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) throw Error(ErrorKind::kPrecondition, "touch events out of time order");
    if (i + 1 < events.size() && events[i].kind != TouchKind::kMove)
      throw Error(ErrorKind::kPrecondition, "only move events may sit between down and up");
  }
  const auto& down = events.front();
  const auto& up = events.back();
  Gesture g;
  g.down_x = down.x;
  g.down_y = down.y;
  g.up_x = up.x;
  g.up_y = up.y;
  g.duration_ms = up.t - down.t;
  const long long dx = up.x - down.x, dy = up.y - down.y;
  g.displacement = std::sqrt(static_cast<double>(dx * dx + dy * dy));
  const long long r = params.tap_radius;
  if (dx * dx + dy * dy <= r * r) {
    g.kind = g.duration_ms < params.long_press_ms ? GestureKind::kTap : GestureKind::kLongPress;
  } else {
    g.kind = GestureKind::kSwipe;
    if (std::llabs(dx) > std::llabs(dy)) g.direction = dx < 0 ? Direction::kLeft : Direction::kRight;
    else g.direction = dy < 0 ? Direction::kUp : Direction::kDown;
  }
  return g;
}

std::optional<int> hit_test(const CompressedView& view, int x, int y) {
  std::optional<int> hit;
  for (const auto& e : view.elements)
    if (e.bounds.contains(x, y)) hit = e.index;
  return hit;
}

Action gesture_to_action(const Gesture& g, const CompressedView& view, ScreenSize screen) {
  auto idx = hit_test(view, g.down_x, g.down_y);
  if (!idx)
    throw Error(ErrorKind::kNoHitElement,
                "no element at (" + std::to_string(g.down_x) + "," + std::to_string(g.down_y) + ")");
  switch (g.kind) {
    case GestureKind::kTap: return act::Tap{*idx};
    case GestureKind::kLongPress: return act::LongPress{*idx};
    case GestureKind::kSwipe: {
      const bool vertical = g.direction == Direction::kUp || g.direction == Direction::kDown;
      const double len = vertical ? std::abs(g.up_y - g.down_y) : std::abs(g.up_x - g.down_x);
      const double ratio = len / (vertical ? screen.height : screen.width);
      const Distance d = ratio < 0.375 ? Distance::kShort : ratio < 0.625 ? Distance::kMedium : Distance::kLong;
      return act::Swipe{*idx, g.direction, d};
    }
  }
  return act::Tap{*idx};
}

GroundedAction gesture_to_grounded(const Gesture& g) {
  const int ms = static_cast<int>(std::max<std::int64_t>(1, g.duration_ms));
  switch (g.kind) {
    case GestureKind::kTap: return grounded::TapAt{g.down_x, g.down_y};
    case GestureKind::kLongPress: return grounded::LongPressAt{g.down_x, g.down_y, ms};
    case GestureKind::kSwipe: return grounded::SwipeFromTo{g.down_x, g.down_y, g.up_x, g.up_y, ms};
  }
  return grounded::TapAt{g.down_x, g.down_y};
}

std::optional<std::vector<TouchEvent>> GeteventParser::feed(const std::string& line) {
  static const std::regex re(R"(^\[\s*([0-9]+)\.([0-9]+)\]\s+\S+:\s+(\S+)\s+(\S+)\s+(\S+))");
  std::smatch m;
  if (!std::regex_search(line, m, re)) return std::nullopt;
  std::string frac = m[2].str() + "000";
  const std::int64_t t = std::stoll(m[1].str()) * 1000 + std::stoll(frac.substr(0, 3));
  const std::string code = m[4].str(), value = m[5].str();
  if (code == "BTN_TOUCH") {
    if (value == "DOWN") pending_down_ = true;
    else if (value == "UP") pending_up_ = true;
  } else if (code == "ABS_MT_TRACKING_ID") {
    if (value == "ffffffff") pending_up_ = true;
    else if (!down_) pending_down_ = true;
  } else if (code == "ABS_MT_POSITION_X") {
    x_ = static_cast<int>(std::lround(static_cast<double>(std::stoll(value, nullptr, 16)) * sx_));
  } else if (code == "ABS_MT_POSITION_Y") {
    y_ = static_cast<int>(std::lround(static_cast<double>(std::stoll(value, nullptr, 16)) * sy_));
  } else if (code == "SYN_REPORT") {
    if (pending_down_ && !down_) {
      events_ = {TouchEvent{TouchKind::kDown, x_, y_, t}};
      down_ = true;
    } else if (pending_up_ && down_) {
      events_.push_back(TouchEvent{TouchKind::kUp, x_, y_, t});
      down_ = false;
      pending_down_ = pending_up_ = false;
      return std::exchange(events_, {});
    } else if (down_) {
      events_.push_back(TouchEvent{TouchKind::kMove, x_, y_, t});
    }
    pending_down_ = false;
    pending_up_ = false;
  }
  return std::nullopt;
}

// ---- trace files --------------------------------------------------------------------------

std::string_view session_status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::kArmed: return "armed";
    case SessionStatus::kWaiting: return "waiting";
    case SessionStatus::kFinished: return "finished";
  }
  return "armed";
}

namespace {

SessionStatus parse_status(const std::string& s) {
  if (s == "waiting") return SessionStatus::kWaiting;
  if (s == "finished") return SessionStatus::kFinished;
  return SessionStatus::kArmed;
}

}  // namespace

std::string trace_to_jsonl(const RecordedTrace& trace) {
  std::string out;
  for (const auto& s : trace.steps) {
    json j = {{"step_index", s.step_index},
              {"action", s.action},
              {"pre_xml_path", s.pre_xml_path},
              {"pre_screenshot_path", s.pre_screenshot_path},
              {"capture_timestamp", s.capture_timestamp},
              {"timestamp", s.timestamp}};
    if (!s.flag.empty()) {
      j["flag"] = s.flag;
      j["raw"] = s.raw;
    }
    if (s.answer) j["answer"] = *s.answer;
    out += j.dump() + "\n";
  }
  return out;
}

RecordedTrace trace_from_jsonl(const std::string& text) {
  RecordedTrace t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RecordedStep s;
      s.step_index = j.at("step_index").get<int>();
      s.action = j.at("action").get<std::string>();
      s.pre_xml_path = j.value("pre_xml_path", "");
      s.pre_screenshot_path = j.value("pre_screenshot_path", "");
      s.capture_timestamp = j.value("capture_timestamp", std::int64_t{0});
      s.timestamp = j.value("timestamp", std::int64_t{0});
      s.flag = j.value("flag", "");
      s.raw = j.value("raw", "");
      if (j.contains("answer") && !j["answer"].is_null()) s.answer = j["answer"].get<std::string>();
      t.steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kCorruptTrace, "trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return t;
}

json SessionInfo::to_json() const {
  return {{"session_id", session_id},
          {"instruction", instruction},
          {"app", app},
          {"screen_width", screen_width},
          {"screen_height", screen_height},
          {"status", session_status_name(status)},
          {"answer", answer ? json(*answer) : json()}};
}

SessionInfo SessionInfo::from_json(const json& j) {
  SessionInfo s;
  s.session_id = j.at("session_id").get<std::string>();
  s.instruction = j.at("instruction").get<std::string>();
  s.app = j.value("app", "");
  s.screen_width = j.at("screen_width").get<int>();
  s.screen_height = j.at("screen_height").get<int>();
  s.status = parse_status(j.value("status", "armed"));
  if (j.contains("answer") && !j["answer"].is_null()) s.answer = j["answer"].get<std::string>();
  return s;
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---- sessions ------------------------------------------------------------------------------

RecordingSession::RecordingSession(std::string session_id, std::string instruction, std::string app, Device& device,
                                   fs::path dir, GestureParams gestures, bool screenshots, Clock clock)
    : device_(device), dir_(std::move(dir)), gestures_(gestures), screenshots_(screenshots), clock_(std::move(clock)) {
  info_.session_id = std::move(session_id);
  info_.instruction = std::move(instruction);
  info_.app = std::move(app);
  info_.screen_width = device.config().screen_width;
  info_.screen_height = device.config().screen_height;
  fs::create_directories(dir_ / "steps");
  fs::create_directories(dir_ / "traces");
  save_info();
}

std::int64_t RecordingSession::now() {
  std::int64_t t = clock_();
  if (t <= last_ts_) t = last_ts_ + 1;
  last_ts_ = t;
  return t;
}

void RecordingSession::save_info() const { write_file_atomic(dir_ / "session.json", info_.to_json().dump(2) + "\n"); }

void RecordingSession::capture() {
  Observation obs = device_.observe(screenshots_);
  const int k = static_cast<int>(steps_.size());
  auto p = std::make_unique<Pending>();
  p->step.step_index = k;
  p->step.pre_xml_path = "steps/" + std::to_string(k) + ".xml";
  write_file_atomic(dir_ / p->step.pre_xml_path, write_hierarchy_xml(obs.tree));
  if (obs.screenshot) {
    p->step.pre_screenshot_path = "steps/" + std::to_string(k) + ".png";
    const auto png = encode_png(*obs.screenshot);
    write_file_atomic(dir_ / p->step.pre_screenshot_path, std::string(png.begin(), png.end()));
  }
  p->step.capture_timestamp = now();
  p->tree = std::move(obs.tree);
  p->view = compress(p->tree);
  pending_ = std::move(p);
}

void RecordingSession::append(RecordedStep step) {
  steps_.push_back(std::move(step));
  pending_.reset();
  write_file_atomic(dir_ / "traces" / "trace.jsonl", trace_to_jsonl(RecordedTrace{steps_}));
}

RecordedStep RecordingSession::begin_step() {
  if (info_.status == SessionStatus::kFinished) throw Error(ErrorKind::kStateError, "session is finished");
  if (info_.status == SessionStatus::kWaiting) throw Error(ErrorKind::kStateError, "a step is already waiting for its action");
  capture();
  info_.status = SessionStatus::kWaiting;
  return pending_->step;
}

void RecordingSession::commit_step(const Action& action, bool perform) {
  if (info_.status != SessionStatus::kWaiting)
    throw Error(ErrorKind::kStateError, "commit needs a begun step (status " + std::string(session_status_name(info_.status)) + ")");
  if (is_finish(action)) {
    finish_session(std::get<act::Finish>(action).answer);
    return;
  }
  const ScreenSize screen{info_.screen_width, info_.screen_height};
  const GroundedAction g = ground(action, pending_->view, screen);
  if (perform) device_.perform(g);
  RecordedStep step = pending_->step;
  step.action = serialize_action(action);
  step.timestamp = now();
  append(std::move(step));
  info_.status = SessionStatus::kArmed;
}

std::optional<Action> RecordingSession::commit_gesture(const std::vector<TouchEvent>& events, bool perform) {
  if (info_.status != SessionStatus::kWaiting)
    throw Error(ErrorKind::kStateError, "commit needs a begun step (status " + std::string(session_status_name(info_.status)) + ")");
  const Gesture g = classify_gesture(events, gestures_);
  const ScreenSize screen{info_.screen_width, info_.screen_height};
  try {
    Action a = gesture_to_action(g, pending_->view, screen);
    commit_step(a, perform);
    return a;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoHitElement) throw;
    spdlog::warn("session {}: {}; step kept for review", info_.session_id, e.what());
  }
  const GroundedAction raw = gesture_to_grounded(g);
  if (perform) device_.perform(raw);
  RecordedStep step = pending_->step;
  step.flag = "no_hit";
  step.raw = describe(raw);
  step.timestamp = now();
  append(std::move(step));
  info_.status = SessionStatus::kArmed;
  return std::nullopt;
}

fs::path RecordingSession::finish_session(const std::optional<std::string>& answer) {
  if (info_.status == SessionStatus::kFinished) throw Error(ErrorKind::kStateError, "session already finished");
  if (info_.status == SessionStatus::kArmed) capture();
  RecordedStep step = pending_->step;
  step.action = serialize_action(act::Finish{answer});
  step.answer = answer;
  step.timestamp = now();
  append(std::move(step));
  info_.status = SessionStatus::kFinished;
  info_.answer = answer;
  save_info();
  if (!fs::exists(dir_ / "review.json")) write_file_atomic(dir_ / "review.json", json{{"verdict", "pending"}}.dump() + "\n");
  return dir_ / "traces" / "trace.jsonl";
}

// ---- review ------------------------------------------------------------------------------

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPending: return "pending";
    case Verdict::kVerified: return "verified";
    case Verdict::kRejected: return "rejected";
  }
  return "pending";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "pending") return Verdict::kPending;
  if (s == "verified") return Verdict::kVerified;
  if (s == "rejected") return Verdict::kRejected;
  throw Error(ErrorKind::kBadArgument, "unknown verdict '" + std::string(s) + "'");
}

Review read_review(const fs::path& session_dir) {
  Review r;
  const fs::path p = session_dir / "review.json";
  if (!fs::exists(p)) return r;
  const json j = json::parse(read_text_file(p));
  r.verdict = parse_verdict(j.value("verdict", "pending"));
  r.reviewer = j.value("reviewer", "");
  r.note = j.value("note", "");
  return r;
}

void set_review(const fs::path& session_dir, Verdict verdict, const std::string& reviewer, const std::string& note) {
  if (verdict == Verdict::kPending) throw Error(ErrorKind::kBadArgument, "a review verdict is verified or rejected");
  const fs::path info = session_dir / "session.json";
  if (!fs::exists(info)) throw Error(ErrorKind::kIo, "no session at " + session_dir.string());
  if (SessionInfo::from_json(json::parse(read_text_file(info))).status != SessionStatus::kFinished)
    throw Error(ErrorKind::kPrecondition, "only finished traces can be reviewed");
  const Review cur = read_review(session_dir);
  if (cur.verdict != Verdict::kPending)
    throw Error(ErrorKind::kConflict, "trace already " + std::string(verdict_name(cur.verdict)) +
                                          (cur.reviewer.empty() ? "" : " by " + cur.reviewer));
  write_file_atomic(session_dir / "review.json",
                    json{{"verdict", verdict_name(verdict)}, {"reviewer", reviewer}, {"note", note}}.dump() + "\n");
}

// ---- export --------------------------------------------------------------------------------

ExportMode parse_export_mode(std::string_view s) {
  if (s == "xml") return ExportMode::kXml;
  if (s == "som") return ExportMode::kSom;
  if (s == "both") return ExportMode::kBoth;
  throw Error(ErrorKind::kConfig, "unknown export mode '" + std::string(s) + "'");
}

json TrainingSample::to_json() const {
  json j = {{"sample_id", sample_id},
            {"instruction", instruction},
            {"history", history},
            {"element_indices", element_indices},
            {"target", target}};
  if (!observation.empty() || image_path.empty()) j["observation"] = observation;
  if (!image_path.empty()) {
    j["image"] = image_path;
    j["legend"] = legend;
  }
  return j;
}

namespace {

bool redacted_id(const std::string& resource_id, const std::vector<std::string>& suffixes) {
  for (const auto& s : suffixes)
    if (!s.empty() && resource_id.size() >= s.size() && resource_id.compare(resource_id.size() - s.size(), s.size(), s) == 0)
      return true;
  return false;
}

void collect_redacted(const UiNode& n, const std::vector<std::string>& suffixes, std::vector<Rect>& out) {
  if (redacted_id(n.resource_id, suffixes)) out.push_back(n.bounds);
  for (const auto& c : n.children) collect_redacted(c, suffixes, out);
}

void redact_node(UiNode& n, const std::vector<std::string>& suffixes) {
  if (redacted_id(n.resource_id, suffixes)) {
    if (!n.text.empty()) n.text = kRedacted;
    if (!n.content_desc.empty()) n.content_desc = kRedacted;
  }
  for (auto& c : n.children) redact_node(c, suffixes);
}

bool focused_is_redacted(const UiNode& n, const std::vector<std::string>& suffixes) {
  if (n.focused && redacted_id(n.resource_id, suffixes)) return true;
  return std::any_of(n.children.begin(), n.children.end(),
                     [&](const UiNode& c) { return focused_is_redacted(c, suffixes); });
}

void append_lines(const fs::path& path, const std::vector<TrainingSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& s : samples) out << s.to_json().dump() << "\n";
}

}  // namespace

void redact_tree(RawUiTree& tree, const std::vector<std::string>& suffixes) {
  if (!suffixes.empty()) redact_node(tree.root, suffixes);
}

ExportResult export_training_samples(const fs::path& session_dir, ExportMode mode, const fs::path& out_dir,
                                     const RedactionList& redact) {
  ExportResult result;
  const fs::path info_path = session_dir / "session.json", trace_path = session_dir / "traces" / "trace.jsonl";
  if (!fs::exists(info_path)) throw Error(ErrorKind::kCorruptTrace, "missing " + info_path.string());
  if (!fs::exists(trace_path)) throw Error(ErrorKind::kCorruptTrace, "missing " + trace_path.string());
  const SessionInfo info = SessionInfo::from_json(json::parse(read_text_file(info_path)));
  if (read_review(session_dir).verdict == Verdict::kRejected) {
    spdlog::info("{}: rejected in review; not exported", info.session_id);
    result.rejected = true;
    return result;
  }
  const RecordedTrace trace = trace_from_jsonl(read_text_file(trace_path));
  const auto red_it = redact.find(info.app);
  const std::vector<std::string> suffixes = red_it == redact.end() ? std::vector<std::string>{} : red_it->second;
  const bool want_xml = mode != ExportMode::kSom, want_som = mode != ExportMode::kXml;

  std::vector<std::string> history;
  for (const auto& step : trace.steps) {
    if (!step.flag.empty()) {
      spdlog::warn("{}: step {} flagged '{}' ({}); excluded", info.session_id, step.step_index, step.flag, step.raw);
      result.excluded_steps.push_back(step.step_index);
      continue;
    }
    const fs::path xml_path = session_dir / step.pre_xml_path;
    if (step.pre_xml_path.empty() || !fs::exists(xml_path))
      throw Error(ErrorKind::kCorruptTrace, "step " + std::to_string(step.step_index) + ": missing " + xml_path.string());
    RawUiTree tree = parse_hierarchy_xml(read_text_file(xml_path), info.screen_width, info.screen_height);
    std::vector<Rect> hidden;
    collect_redacted(tree.root, suffixes, hidden);
    std::string target = step.action;
    if (!suffixes.empty() && focused_is_redacted(tree.root, suffixes)) {
      Action a = parse_model_action(step.action);
      if (auto* t = std::get_if<act::Type>(&a)) {
        t->text = kRedacted;
        target = serialize_action(a);
      }
    }
    redact_tree(tree, suffixes);
    const CompressedView view = compress(tree);

    TrainingSample base;
    base.sample_id = info.session_id + "/" + std::to_string(step.step_index);
    base.instruction = info.instruction;
    base.history = history;
    base.target = target;
    for (const auto& e : view.elements) base.element_indices.push_back(e.index);

    if (want_xml) {
      TrainingSample s = base;
      s.observation = view.text_rendering;
      result.xml.push_back(std::move(s));
    }
    if (want_som) {
      const fs::path png_path = session_dir / step.pre_screenshot_path;
      if (step.pre_screenshot_path.empty() || !fs::exists(png_path))
        throw Error(ErrorKind::kCorruptTrace, "step " + std::to_string(step.step_index) + ": missing screenshot");
      const std::string bytes = read_text_file(png_path);
      Image shot = decode_png(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      for (const auto& r : hidden) shot.fill_rect(r, Rgba{128, 128, 128, 255});
      SomImage som = render_som(shot, view);
      TrainingSample s = base;
      s.image_path = "som/" + info.session_id + "_" + std::to_string(step.step_index) + ".png";
      s.legend = legend_to_json(som.legend);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir / "som");
        write_file_atomic(out_dir / s.image_path, std::string(som.png.begin(), som.png.end()));
      }
      result.som.push_back(std::move(s));
    }
    history.push_back(target);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    if (want_xml) append_lines(out_dir / "xml.jsonl", result.xml);
    if (want_som) append_lines(out_dir / "som.jsonl", result.som);
  }
  return result;
}

// ---- task expansion ------------------------------------------------------------------------

namespace {

std::string dedup_key(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
  return out;
}

std::string strip_list_marker(std::string line) {
  static const std::regex marker(R"(^\s*(?:[-*•]|\d+[.)]|\(\d+\))\s*)");
  line = std::regex_replace(line, marker, "");
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = line.substr(1, line.size() - 2);
  return line;
}

}  // namespace

Expansion expand_tasks(const std::vector<std::string>& seeds, LlmClient& llm, const std::string& app, int n,
                       const std::string& app_description) {
  if (seeds.empty()) throw Error(ErrorKind::kPrecondition, "expand_tasks needs at least one seed instruction");
  if (n < 1) throw Error(ErrorKind::kPrecondition, "expand_tasks needs n >= 1");
  std::string prompt = "You write test tasks for a phone assistant working in the " + app + " app.\n";
  if (!app_description.empty()) prompt += "About the app: " + app_description + "\n";
  prompt += "Example tasks:\n";
  for (const auto& s : seeds) prompt += "- " + s + "\n";
  prompt += "\nWrite " + std::to_string(n) +
            " new tasks of the same kind, each with a single well-defined outcome. One task per line, no "
            "numbering, no other text.";
  ChatRequest req;
  req.messages.push_back(ChatMessage::text("user", prompt));
  const std::string reply = llm_call(llm, req);

  Expansion out;
  std::set<std::string> seen;
  for (const auto& s : seeds) seen.insert(dedup_key(s));
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    const std::string cand = strip_list_marker(line);
    if (cand.empty()) continue;
    if (!seen.insert(dedup_key(cand)).second) {
      ++out.dropped;
      continue;
    }
    if (static_cast<int>(out.candidates.size()) < n) out.candidates.push_back(cand);
  }
  if (out.dropped > 0) spdlog::info("expand_tasks: dropped {} duplicate candidate(s)", out.dropped);
  return out;
}

// ---- local HTTP API --------------------------------------------------------------------

struct RecorderServer::Impl {
  Impl(Device& d, RecorderServerConfig c) : device(d), cfg(std::move(c)) {}

  Device& device;
  RecorderServerConfig cfg;
  std::mutex mu;
  std::condition_variable cv;
  std::map<std::string, std::unique_ptr<RecordingSession>> sessions;
  std::string active;
  std::int64_t version = 0;
  int next_id = 1;
  httplib::Server http;
  std::thread thread;

  void bump() {
    ++version;
    cv.notify_all();
  }
};

namespace {

using Response = RecorderServer::Response;

Response ok(json body) { return Response{200, std::move(body), {}, "application/json"}; }

Response fail(int status, const std::string& message) {
  return Response{status, json{{"error", message}}, {}, "application/json"};
}

int status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kStateError:
    case ErrorKind::kConflict:
    case ErrorKind::kPrecondition: return 409;
    case ErrorKind::kBadArgument:
    case ErrorKind::kNoActionFound:
    case ErrorKind::kIndexOutOfRange:
    case ErrorKind::kNoHitElement:
    case ErrorKind::kNoFocusedField:
    case ErrorKind::kUnknownApp:
    case ErrorKind::kConfig: return 400;
    case ErrorKind::kExecutionFailed:
    case ErrorKind::kXmlAcquisitionFailed:
    case ErrorKind::kDeviceNotFound:
    case ErrorKind::kMultipleDevices:
    case ErrorKind::kAdbUnavailable: return 502;
    default: return 500;
  }
}

bool safe_id(const std::string& id) {
  static const std::regex re(R"([A-Za-z0-9_-]{1,64})");
  return std::regex_match(id, re);
}

json step_json(const RecordedStep& s) {
  json j = {{"step_index", s.step_index},
            {"action", s.action},
            {"pre_xml_path", s.pre_xml_path},
            {"pre_screenshot_path", s.pre_screenshot_path},
            {"capture_timestamp", s.capture_timestamp},
            {"timestamp", s.timestamp}};
  if (!s.flag.empty()) {
    j["flag"] = s.flag;
    j["raw"] = s.raw;
  }
  if (s.answer) j["answer"] = *s.answer;
  return j;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(std::exchange(cur, {}));
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Response file_response(const fs::path& p) {
  if (!fs::exists(p)) return fail(404, "no such file");
  Response r;
  r.binary = read_text_file(p);
  r.content_type = "image/png";
  return r;
}

std::int64_t query_int(const std::map<std::string, std::string>& q, const std::string& key, std::int64_t dflt) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return dflt;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw Error(ErrorKind::kBadArgument, "query parameter '" + key + "' must be an integer");
  }
}

TouchKind parse_touch_kind(const std::string& s) {
  if (s == "down") return TouchKind::kDown;
  if (s == "move") return TouchKind::kMove;
  if (s == "up") return TouchKind::kUp;
  throw Error(ErrorKind::kBadArgument, "touch kind must be down, move or up");
}

// Commit payload -> action. Gestures are handled by the caller.
Action payload_action(const json& j) {
  if (j.contains("action")) return parse_model_action(j.at("action").get<std::string>());
  const std::string kind = j.value("kind", "");
  auto element = [&] {
    if (!j.contains("element") || !j["element"].is_number_integer())
      throw Error(ErrorKind::kBadArgument, kind + " needs an integer 'element'");
    return j["element"].get<int>();
  };
  if (kind == "tap") return act::Tap{element()};
  if (kind == "long_press") return act::LongPress{element()};
  if (kind == "home") return act::Home{};
  if (kind == "back") return act::Back{};
  if (kind == "type") return act::Type{j.at("text").get<std::string>()};
  if (kind == "swipe")
    return parse_model_action("swipe(element=" + std::to_string(element()) +
                              ", direction=\"" + j.value("direction", "up") + "\", distance=\"" + j.value("distance", "medium") + "\")");
  if (kind == "enter" || kind == "press_enter")
    throw Error(ErrorKind::kBadArgument, "press enter is not in the action space; commit type(...) instead");
  throw Error(ErrorKind::kBadArgument, "unknown commit kind '" + kind + "'");
}

}  // namespace

RecorderServer::RecorderServer(Device& device, RecorderServerConfig cfg)
    : impl_(std::make_unique<Impl>(device, std::move(cfg))) {
  fs::create_directories(impl_->cfg.root);
}

RecorderServer::~RecorderServer() { stop(); }

int RecorderServer::start(const std::string& host, int port) {
  auto& http = impl_->http;
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    Response r = handle(req.method, req.path, req.body, query);
    res.status = r.status;
    if (!r.binary.empty()) res.set_content(r.binary, r.content_type);
    else res.set_content(r.body.dump(), "application/json");
  };
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Headers", "Content-Type"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  http.Get(".*", dispatch);
  http.Post(".*", dispatch);
  http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (port == 0) port = http.bind_to_any_port(host);
  else if (!http.bind_to_port(host, port)) port = -1;
  if (port < 0) throw Error(ErrorKind::kIo, "cannot bind " + host);
  port_ = port;
  impl_->thread = std::thread([&http] { http.listen_after_bind(); });
  spdlog::info("recorder listening on http://{}:{}", host, port_);
  return port_;
}

void RecorderServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

RecorderServer::Response RecorderServer::handle(const std::string& method, const std::string& path,
                                                const std::string& body, const std::map<std::string, std::string>& query) {
  Impl& m = *impl_;
  try {
    const auto seg = split_path(path);
    if (seg.empty() || seg[0] != "sessions") return fail(404, "unknown route " + path);
    std::unique_lock lock(m.mu);
    json payload = json::object();
    if (method == "POST" && !body.empty()) payload = json::parse(body);
    if (!payload.is_object()) return fail(400, "payload must be a JSON object");

    if (seg.size() == 1) {
      if (method == "GET") {
        json list = json::array();
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(m.cfg.root))
          if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
          const std::string id = d.filename().string();
          auto it = m.sessions.find(id);
          SessionInfo info = it != m.sessions.end() ? it->second->info()
                                                    : SessionInfo::from_json(json::parse(read_text_file(d / "session.json")));
          json j = info.to_json();
          j["review"] = verdict_name(read_review(d).verdict);
          list.push_back(std::move(j));
        }
        return ok({{"sessions", list}, {"active", m.active.empty() ? json() : json(m.active)}, {"version", m.version}});
      }
      if (method != "POST") return fail(405, "method not allowed");
      if (!m.active.empty() && m.sessions.at(m.active)->status() != SessionStatus::kFinished)
        return fail(409, "session " + m.active + " is still recording on this device");
      const std::string instruction = payload.value("instruction", "");
      const std::string app = payload.value("app", "");
      if (instruction.empty() || app.empty()) return fail(400, "instruction and app are required");
      std::string id = payload.value("session_id", "");
      int taken_id = 0;
      if (id.empty()) {
        taken_id = m.next_id;
        for (;; ++taken_id) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "session-%04d", taken_id);
          id = buf;
          if (!fs::exists(m.cfg.root / id)) break;
        }
      } else if (!safe_id(id)) {
        return fail(400, "session_id may only use letters, digits, '-' and '_'");
      } else if (fs::exists(m.cfg.root / id)) {
        return fail(409, "session " + id + " already exists");
      }
      if (m.cfg.reset_on_create) m.device.reset(app, payload.value("fixture", ""));
      auto session = std::make_unique<RecordingSession>(id, instruction, app, m.device, m.cfg.root / id, m.cfg.gestures,
                                                        m.cfg.screenshots);
      if (taken_id > 0) m.next_id = taken_id + 1;
      json info = session->info().to_json();
      m.sessions[id] = std::move(session);
      m.active = id;
      m.bump();
      info["version"] = m.version;
      return Response{201, info, {}, "application/json"};
    }

    const std::string& id = seg[1];
    if (!safe_id(id)) return fail(404, "no session " + id);
    const fs::path dir = m.cfg.root / id;
    auto it = m.sessions.find(id);
    RecordingSession* session = it == m.sessions.end() ? nullptr : it->second.get();
    if (!session && !fs::exists(dir / "session.json")) return fail(404, "no session " + id);
    const std::string verb = seg.size() >= 3 ? seg[2] : "";

    auto state = [&]() {
      json j;
      json steps = json::array();
      if (session) {
        j = session->info().to_json();
        for (const auto& s : session->steps()) steps.push_back(step_json(s));
        if (const auto* v = session->pending_view()) {
          json elems = json::array();
          for (const auto& e : v->elements)
            elems.push_back({{"index", e.index},
                             {"label", e.label},
                             {"bounds", {e.bounds.left, e.bounds.top, e.bounds.right, e.bounds.bottom}}});
          j["pending"] = {{"step_index", session->steps().size()}, {"elements", elems}, {"observation", v->text_rendering}};
        }
      } else {
        j = SessionInfo::from_json(json::parse(read_text_file(dir / "session.json"))).to_json();
        const fs::path t = dir / "traces" / "trace.jsonl";
        if (fs::exists(t))
          for (const auto& s : trace_from_jsonl(read_text_file(t)).steps) steps.push_back(step_json(s));
      }
      j["steps"] = steps;
      j["review"] = verdict_name(read_review(dir).verdict);
      j["version"] = m.version;
      return j;
    };

    if (method == "GET" && seg.size() == 2) {
      const std::int64_t since = query_int(query, "since", -1);
      const std::int64_t wait_ms = std::clamp<std::int64_t>(query_int(query, "wait_ms", 0), 0, 30000);
      if (since >= 0 && wait_ms > 0)
        m.cv.wait_for(lock, std::chrono::milliseconds(wait_ms), [&] { return m.version > since; });
      it = m.sessions.find(id);
      session = it == m.sessions.end() ? nullptr : it->second.get();
      return ok(state());
    }
    if (method == "GET" && verb == "screenshot" && seg.size() == 3) {
      if (session && session->pending_view() && query.count("live") == 0) {
        const auto& steps = session->steps();
        const fs::path p = dir / "steps" / (std::to_string(steps.size()) + ".png");
        if (fs::exists(p)) return file_response(p);
      }
      if (!session || session->status() == SessionStatus::kFinished) return fail(409, "session is not recording");
      Observation obs = m.device.observe(true);
      if (!obs.screenshot) return fail(502, "device returned no screenshot");
      const auto png = encode_png(*obs.screenshot);
      Response r;
      r.binary.assign(png.begin(), png.end());
      r.content_type = "image/png";
      return r;
    }
    if (method == "GET" && verb == "steps" && seg.size() == 5 && seg[4] == "screenshot") {
      if (!std::all_of(seg[3].begin(), seg[3].end(), [](unsigned char c) { return std::isdigit(c); }))
        return fail(404, "bad step index");
      return file_response(dir / "steps" / (seg[3] + ".png"));
    }
    if (verb == "review" && seg.size() == 3) {
      if (method == "GET") {
        const Review r = read_review(dir);
        return ok({{"verdict", verdict_name(r.verdict)}, {"reviewer", r.reviewer}, {"note", r.note}});
      }
      set_review(dir, parse_verdict(payload.value("verdict", "")), payload.value("reviewer", ""), payload.value("note", ""));
      m.bump();
      return ok({{"verdict", payload["verdict"]}, {"version", m.version}});
    }
    if (method != "POST" || seg.size() != 3) return fail(404, "unknown route " + path);
    if (!session) return fail(409, "session " + id + " is not open in this recorder");

    if (verb == "begin") {
      RecordedStep s = session->begin_step();
      m.bump();
      json j = state();
      j["begun"] = step_json(s);
      return ok(j);
    }
    if (verb == "commit") {
      const bool perform = payload.value("perform", true);
      json j;
      if (payload.value("kind", "") == "gesture") {
        std::vector<TouchEvent> events;
        for (const auto& e : payload.at("events"))
          events.push_back(TouchEvent{parse_touch_kind(e.at("kind").get<std::string>()), e.at("x").get<int>(),
                                      e.at("y").get<int>(), e.at("t").get<std::int64_t>()});
        std::optional<Action> a;
        try {
          a = session->commit_gesture(events, perform);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::kPrecondition && session->status() == SessionStatus::kWaiting)
            return fail(400, e.what());
          throw;
        }
        j["bound"] = a ? json(serialize_action(*a)) : json();
      } else {
        const Action a = payload_action(payload);
        session->commit_step(a, perform);
        j["bound"] = serialize_action(a);
      }
      m.bump();
      json st = state();
      st["committed"] = j["bound"];
      return ok(st);
    }
    if (verb == "finish") {
      std::optional<std::string> answer;
      if (payload.contains("answer") && !payload["answer"].is_null()) answer = payload["answer"].get<std::string>();
      const fs::path trace = session->finish_session(answer);
      m.bump();
      json st = state();
      st["trace_path"] = trace.string();
      return ok(st);
    }
    return fail(404, "unknown route " + path);
  } catch (const Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(400, std::string("bad payload: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(500, e.what());
  }
}

}  // namespace mobench
