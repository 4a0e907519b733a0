#pragma once

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mobench/actions.hpp"
#include "mobench/device.hpp"
#include "mobench/llm_client.hpp"
#include "mobench/ui_tree.hpp"

namespace mobench {

// ---- gestures ------------------------------------------------------------------------

enum class TouchKind { kDown, kMove, kUp };

struct TouchEvent {
  TouchKind kind = TouchKind::kDown;
  int x = 0;
  int y = 0;
  std::int64_t t = 0;  // ms
};

struct GestureParams {
  int tap_radius = 24;       // px
  int long_press_ms = 600;
};

enum class GestureKind { kTap, kLongPress, kSwipe };

struct Gesture {
  GestureKind kind = GestureKind::kTap;
  Direction direction = Direction::kUp;  // swipes only
  int down_x = 0, down_y = 0, up_x = 0, up_y = 0;
  std::int64_t duration_ms = 0;
  double displacement = 0;
};

// Throws Precondition when the stream is not down ... up in time order.
Gesture classify_gesture(const std::vector<TouchEvent>& events, const GestureParams& params = {});

// Last element in pre-order whose bounds contain the point (the innermost one
// for nested elements); nullopt when nothing is hit.
std::optional<int> hit_test(const CompressedView& view, int x, int y);

// Binds a gesture to the element under its down point. Swipe distance is
// bucketed against the screen dimension along the swipe axis.
// Throws NoHitElement.
Action gesture_to_action(const Gesture& g, const CompressedView& view, ScreenSize screen);

// Raw-coordinate form of a gesture, used for steps that hit no element.
GroundedAction gesture_to_grounded(const Gesture& g);

// Incremental parser for `getevent -lt` output of a single-touch stream.
class GeteventParser {
 public:
  // Device units to screen pixels; see `getevent -p` for the axis maxima.
  GeteventParser(double scale_x = 1.0, double scale_y = 1.0) : sx_(scale_x), sy_(scale_y) {}
  // Returns a complete down..up sequence when `line` ends a gesture.
  std::optional<std::vector<TouchEvent>> feed(const std::string& line);

 private:
  double sx_, sy_;
  bool down_ = false;
  bool pending_down_ = false;
  bool pending_up_ = false;
  int x_ = 0, y_ = 0;
  std::vector<TouchEvent> events_;
};

// ---- sessions --------------------------------------------------------------------------

enum class SessionStatus { kArmed, kWaiting, kFinished };
std::string_view session_status_name(SessionStatus s);

struct RecordedStep {
  int step_index = 0;
  std::string action;  // canonical form; empty for flagged raw steps
  std::string pre_xml_path;         // relative to the session directory
  std::string pre_screenshot_path;  // may be empty when captured without screenshots
  std::int64_t capture_timestamp = 0;
  std::int64_t timestamp = 0;  // when the action was committed
  std::string flag;            // "no_hit" for raw steps excluded from export
  std::string raw;             // raw-coordinate description for flagged steps
  std::optional<std::string> answer;  // finish step only

  bool operator==(const RecordedStep&) const = default;
};

struct RecordedTrace {
  std::vector<RecordedStep> steps;
  bool operator==(const RecordedTrace&) const = default;
};

std::string trace_to_jsonl(const RecordedTrace& trace);
RecordedTrace trace_from_jsonl(const std::string& text);

struct SessionInfo {
  std::string session_id;
  std::string instruction;
  std::string app;
  int screen_width = 0;
  int screen_height = 0;
  SessionStatus status = SessionStatus::kArmed;
  std::optional<std::string> answer;

  nlohmann::json to_json() const;
  static SessionInfo from_json(const nlohmann::json& j);
};

using Clock = std::function<std::int64_t()>;
std::int64_t wall_clock_ms();

class RecordingSession {
 public:
  RecordingSession(std::string session_id, std::string instruction, std::string app, Device& device,
                   std::filesystem::path dir, GestureParams gestures = {}, bool screenshots = true,
                   Clock clock = wall_clock_ms);

  // armed -> waiting. Captures the pre-action hierarchy (and screenshot).
  RecordedStep begin_step();
  // waiting -> armed. Records the action, then performs it unless the device
  // already did (real touches on a phone).
  void commit_step(const Action& action, bool perform = true);
  // Classifies a raw touch stream against the pending capture. A gesture that
  // hits no element is kept as a flagged raw step. Returns the action if bound.
  std::optional<Action> commit_gesture(const std::vector<TouchEvent>& events, bool perform = true);
  // Appends the Finish step (capturing first when armed) and writes the trace.
  std::filesystem::path finish_session(const std::optional<std::string>& answer = std::nullopt);

  SessionStatus status() const { return info_.status; }
  const SessionInfo& info() const { return info_; }
  const std::vector<RecordedStep>& steps() const { return steps_; }
  const std::filesystem::path& dir() const { return dir_; }
  // Compressed view of the pending capture (waiting state only).
  const CompressedView* pending_view() const { return pending_ ? &pending_->view : nullptr; }

 private:
  struct Pending {
    RecordedStep step;
    RawUiTree tree;
    CompressedView view;
  };
  void capture();
  void append(RecordedStep step);
  void save_info() const;

  SessionInfo info_;
  Device& device_;
  std::filesystem::path dir_;
  GestureParams gestures_;
  bool screenshots_;
  Clock clock_;
  std::int64_t last_ts_ = 0;
  std::vector<RecordedStep> steps_;
  std::unique_ptr<Pending> pending_;
  std::int64_t now();
};

// ---- review ----------------------------------------------------------------------------

enum class Verdict { kPending, kVerified, kRejected };
std::string_view verdict_name(Verdict v);
Verdict parse_verdict(std::string_view s);

struct Review {
  Verdict verdict = Verdict::kPending;
  std::string reviewer;
  std::string note;
};

Review read_review(const std::filesystem::path& session_dir);
// Throws Precondition when the session is unfinished and Conflict when it was
// already ruled on.
void set_review(const std::filesystem::path& session_dir, Verdict verdict, const std::string& reviewer,
                const std::string& note);

// ---- export ----------------------------------------------------------------------------

enum class ExportMode { kXml, kSom, kBoth };
ExportMode parse_export_mode(std::string_view s);

// app id -> resource-id suffixes whose text is replaced at export time.
using RedactionList = std::map<std::string, std::vector<std::string>>;
inline constexpr const char* kRedacted = "[REDACTED]";

struct TrainingSample {
  std::string sample_id;
  std::string instruction;
  std::vector<std::string> history;
  std::string observation;  // xml: text rendering
  std::string image_path;   // som: marked screenshot, relative to the export dir
  nlohmann::json legend;    // som: index/bounds/label records
  std::vector<int> element_indices;
  std::string target;

  nlohmann::json to_json() const;
};

struct ExportResult {
  std::vector<TrainingSample> xml;
  std::vector<TrainingSample> som;
  std::vector<int> excluded_steps;
  bool rejected = false;
};

// Writes xml.jsonl / som.jsonl (+ som/*.png) under out_dir when it is nonempty.
ExportResult export_training_samples(const std::filesystem::path& session_dir, ExportMode mode,
                                     const std::filesystem::path& out_dir = {}, const RedactionList& redact = {});

void redact_tree(RawUiTree& tree, const std::vector<std::string>& suffixes);

// ---- task expansion ----------------------------------------------------------------------

struct Expansion {
  std::vector<std::string> candidates;  // all awaiting human review
  int dropped = 0;                      // duplicates of seeds or of each other
};

Expansion expand_tasks(const std::vector<std::string>& seeds, LlmClient& llm, const std::string& app, int n,
                       const std::string& app_description = {});

// ---- local HTTP API --------------------------------------------------------------------

struct RecorderServerConfig {
  std::filesystem::path root;  // one subdirectory per session
  GestureParams gestures;
  bool screenshots = true;
  bool reset_on_create = true;
};

// Serves the annotation UI. Requests are serialized; long polls wait without
// holding the lock. One unfinished session at a time per device.
class RecorderServer {
 public:
  RecorderServer(Device& device, RecorderServerConfig cfg);
  ~RecorderServer();
  RecorderServer(const RecorderServer&) = delete;
  RecorderServer& operator=(const RecorderServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  int port() const { return port_; }

  // Handles one request without the network, for tests and embedding.
  struct Response {
    int status = 200;
    nlohmann::json body;
    std::string binary;  // image responses
    std::string content_type = "application/json";
  };
  Response handle(const std::string& method, const std::string& path, const std::string& body,
                  const std::map<std::string, std::string>& query = {});

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace mobench
