// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "mobench/agent.hpp"
#include "mobench/bench_runner.hpp"
#include "mobench/errors.hpp"
#include "mobench/evaluation.hpp"
#include "mobench/metrics.hpp"
#include "mobench/recorder.hpp"
#include "mobench/sim.hpp"
#include "mobench/som_overlay.hpp"

using namespace mobench;
namespace fs = std::filesystem;
using nlohmann::json;
using Steady = std::chrono::steady_clock;

namespace {

const fs::path kSource = MOBENCH_SOURCE_DIR;
const fs::path kSuite = kSource / "data" / "sim_suite";

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-26s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Steady::time_point t0) { return std::chrono::duration<double>(Steady::now() - t0).count(); }

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mobench-accept-" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SuiteConfig sim_suite(const fs::path& out) {
  SuiteConfig cfg;
  cfg.suite_dir = kSuite;
  cfg.device.step_interval = 0;
  cfg.output_dir = out;
  return cfg;
}

// ---- 1: metric arithmetic from per-app completion counts ---------------------------

Outcome metric_arithmetic() {
  const std::vector<int> app_sizes = {15, 14, 12, 27, 15, 15, 12, 23, 5};
  struct Row {
    const char* name;
    std::vector<int> done;
    double expected_sr;
  };
  const std::vector<Row> rows = {
      {"som gpt-4o", {1, 1, 5, 7, 8, 2, 2, 13, 4}, 31.16},
      {"xml gpt-4o", {1, 0, 3, 8, 5, 5, 2, 10, 1}, 25.36},
      {"xml gpt-4-1106", {1, 4, 6, 4, 6, 6, 4, 9, 3}, 31.16},
  };
  const auto t0 = Steady::now();
  Outcome o;
  for (const auto& row : rows) {
    std::vector<EvalResult> results;
    for (std::size_t a = 0; a < app_sizes.size(); ++a)
      for (int i = 0; i < app_sizes[a]; ++i) {
        EvalResult r;
        r.task_id = "app" + std::to_string(a) + "_" + std::to_string(i);
        r.app = "app" + std::to_string(a);
        r.kind = TaskKind::kQuery;
        r.completed = i < row.done[a];
        r.answer_correct = r.completed;
        r.steps_taken = 3;
        r.human_steps = 3;
        results.push_back(r);
      }
    const json j = json::parse(report(results, ReportFormat::kJson));
    const double sr = j.at("sr").get<double>();
    if (std::abs(sr - row.expected_sr) > 0.01) o.pass = false;
    o.detail += std::string(row.name) + "=" + fmt2(sr) + " ";
  }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) o.pass = false;
  o.detail += "(" + fmt2(secs) + " s)";
  return o;
}

// ---- 2: RRR suppression property ------------------------------------------------------

Outcome rrr_suppression() {
  std::mt19937_64 rng(20241019);
  int violations = 0, suppressed = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = std::uniform_int_distribution<int>(1, 300)(rng);
    // Bias towards low success rates so the threshold is exercised.
    const int max_done = std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? n : std::max(1, n / 10);
    const int done = std::uniform_int_distribution<int>(0, max_done)(rng);
    std::vector<EvalResult> results(n);
    for (int i = 0; i < n; ++i) {
      auto& r = results[i];
      r.task_id = "t" + std::to_string(i);
      r.app = "a";
      r.kind = TaskKind::kQuery;
      r.completed = i < done;
      r.answer_correct = r.completed;
      r.human_steps = std::uniform_int_distribution<int>(1, 10)(rng);
      r.steps_taken = std::uniform_int_distribution<int>(1, 25)(rng);
    }
    std::shuffle(results.begin(), results.end(), rng);
    const MetricsReport m = aggregate(results);
    const json j = report_json(m);
    const bool low = m.sr < 5.0;
    if (low) ++suppressed;
    if (low && (m.rrr.has_value() || !j.at("rrr").is_null())) ++violations;
    if (!low && !m.rrr.has_value()) ++violations;
  }
  return {violations == 0, "1000 cases, " + std::to_string(suppressed) + " below SR 5, " +
                               std::to_string(violations) + " violations"};
}

// ---- 3: oracle and random agents on the sim suite ----------------------------------

Outcome oracle_end_to_end() {
  const auto t0 = Steady::now();
  TempDir a, b;
  OracleClient oracle(load_tasks(kSuite / "tasks"));
  const SuiteRun run = run_suite(sim_suite(a.path()), oracle);
  RandomClient random(1);
  const SuiteRun rnd = run_suite(sim_suite(b.path()), random);
  const double secs = seconds_since(t0);

  std::set<std::string> apps;
  int queries = 0;
  for (const auto& r : run.results) {
    apps.insert(r.app);
    queries += r.kind == TaskKind::kQuery;
  }
  const auto& m = run.report;
  const bool shape = run.results.size() >= 12 && apps.size() >= 5 && queries >= 3;
  const bool all100 = m.sr == 100.0 && m.sub_sr == std::optional<double>(100.0) &&
                      m.rrr == std::optional<double>(100.0) && m.ror == std::optional<double>(100.0);
  std::string detail = std::to_string(run.results.size()) + " tasks/" + std::to_string(apps.size()) + " apps/" +
                       std::to_string(queries) + " queries; oracle SR " + fmt2(m.sr) + " Sub-SR " +
                       (m.sub_sr ? fmt2(*m.sub_sr) : "-") + " RRR " + (m.rrr ? fmt2(*m.rrr) : "-") + " ROR " +
                       (m.ror ? fmt2(*m.ror) : "-") + "; random SR " + fmt2(rnd.report.sr) + " (" + fmt2(secs) + " s)";
  return {shape && all100 && rnd.report.sr <= 10.0 && secs < 30.0, detail};
}

// ---- 4: SoM legend and compressed view agree -----------------------------------------

UiNode random_node(std::mt19937_64& rng, int w, int h, int depth) {
  static const std::vector<std::string> classes = {"android.widget.TextView", "android.widget.Button",
                                                   "android.widget.ImageView", "android.widget.EditText",
                                                   "android.widget.LinearLayout", "android.widget.Switch"};
  static const std::vector<std::string> words = {"", "OK", "Cancel", "Wi-Fi", "Ünïcødé", "日本語", "a\nb", "12:00"};
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  UiNode n;
  n.class_name = classes[pick(static_cast<int>(classes.size()))];
  n.text = words[pick(static_cast<int>(words.size()))];
  if (pick(3) == 0) n.resource_id = "pkg:id/r" + std::to_string(pick(50));
  // Some bounds stick out of the screen on purpose.
  const int x = pick(w + 100) - 50, y = pick(h + 100) - 50;
  n.bounds = {x, y, x + 1 + pick(w / 2), y + 1 + pick(h / 4)};
  n.enabled = pick(6) != 0;
  n.visible = pick(8) != 0;
  n.clickable = pick(3) == 0;
  n.long_clickable = pick(8) == 0;
  n.scrollable = pick(10) == 0;
  n.checkable = pick(8) == 0;
  n.checked = n.checkable && pick(2) == 0;
  n.focusable = pick(4) == 0;
  if (depth < 4)
    for (int k = pick(4); k > 0; --k) n.children.push_back(random_node(rng, w, h, depth + 1));
  return n;
}

Outcome som_alignment() {
  std::mt19937_64 rng(7);
  int violations = 0, total_elements = 0;
  const int cases = 250;
  for (int c = 0; c < cases; ++c) {
    const int w = c % 2 ? 720 : 1080, h = c % 2 ? 1600 : 2400;
    RawUiTree t;
    t.screen_width = w;
    t.screen_height = h;
    t.root.class_name = "android.widget.FrameLayout";
    t.root.bounds = {0, 0, w, h};
    t.root.enabled = true;
    for (int k = 1 + static_cast<int>(rng() % 6); k > 0; --k) t.root.children.push_back(random_node(rng, w, h, 1));
    int next = 0;
    std::function<void(UiNode&)> number = [&](UiNode& n) {
      n.node_id = next++;
      for (auto& ch : n.children) number(ch);
    };
    number(t.root);
    const CompressedView view = compress(t);
    const SomImage som = render_som(Image(w, h), view);
    std::vector<int> from_view, from_legend;
    for (const auto& e : view.elements) from_view.push_back(e.index);
    for (const auto& e : som.legend) from_legend.push_back(e.index);
    bool ok = from_view == from_legend;
    for (std::size_t i = 0; i < from_view.size(); ++i) ok = ok && from_view[i] == static_cast<int>(i);
    if (!ok) ++violations;
    total_elements += static_cast<int>(from_view.size());
  }
  return {violations == 0, std::to_string(cases) + " trees, " + std::to_string(total_elements) + " elements, " +
                               std::to_string(violations) + " violations"};
}

// ---- 5: action grammar round trip --------------------------------------------------

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", "0", " ", "\"", "\\", "'", ",", ")", "(", "=", "\n",
                                                  "é", "ß", "Ω", "中", "文", "🙂", "👍🏽", " ", "tap(element=1)"};
  std::string s;
  for (int k = static_cast<int>(rng() % 12); k > 0; --k) s += pieces[rng() % pieces.size()];
  return s;
}

Action random_action(std::mt19937_64& rng) {
  const int idx = static_cast<int>(rng() % 200);
  switch (rng() % 7) {
    case 0: return act::Tap{idx};
    case 1: return act::LongPress{idx};
    case 2: return act::Swipe{idx, static_cast<Direction>(rng() % 4), static_cast<Distance>(rng() % 3)};
    case 3: return act::Type{random_text(rng)};
    case 4: return act::Home{};
    case 5: return act::Back{};
    default: {
      act::Finish f;
      if (rng() % 2) f.answer = random_text(rng);
      return f;
    }
  }
}

Outcome action_round_trip() {
  std::mt19937_64 rng(99);
  int violations = 0, typed = 0;
  const int cases = 2000;
  std::string first_bad;
  for (int c = 0; c < cases; ++c) {
    const Action a = random_action(rng);
    typed += std::holds_alternative<act::Type>(a);
    bool ok = false;
    try {
      ok = parse_model_action(serialize_action(a)) == a;
    } catch (const Error&) {
    }
    if (!ok) {
      ++violations;
      if (first_bad.empty()) first_bad = serialize_action(a);
    }
  }
  return {violations == 0, std::to_string(cases) + " actions (" + std::to_string(typed) + " type), " +
                               std::to_string(violations) + " violations" + (first_bad.empty() ? "" : ": " + first_bad)};
}

// ---- 6: step cap -------------------------------------------------------------------

Outcome step_cap() {
  auto apps = SimAppRegistry::load_dir(kSuite / "apps");
  const auto tasks = load_tasks(kSuite / "tasks");
  std::string detail;
  bool pass = true;
  for (const char* reply : {"back()", "home()"}) {
    DeviceConfig dc;
    dc.step_interval = 0;
    auto dev = setup(dc, apps);
    const TaskSpec& task = tasks.front();
    dev->reset(task.app);
    ScriptedLlmClient never({reply});
    const Trace t = run_episode(EpisodeConfig{}, task, *dev, never);
    pass = pass && t.steps.size() == 25 && t.termination == Termination::kStepCap;
    detail += std::string(reply) + ": " + std::to_string(t.steps.size()) + " steps, " +
              std::string(termination_name(t.termination)) + "; ";
  }
  return {pass, detail};
}

// ---- 7: sub-goal evidence at an intermediate step ----------------------------------

Step page_step(int index, const std::string& page) {
  auto obs = std::make_shared<Observation>();
  obs->tree.screen_width = 1080;
  obs->tree.screen_height = 2400;
  obs->tree.root.class_name = "android.widget.FrameLayout";
  obs->tree.root.bounds = {0, 0, 1080, 2400};
  UiNode label;
  label.node_id = 1;
  label.class_name = "android.widget.TextView";
  label.text = page;
  label.bounds = {0, 300, 1080, 400};
  obs->tree.root.children.push_back(label);
  Step s;
  s.step_index = index;
  s.action = act::Back{};
  s.pre_observation = obs;
  s.post_observation = obs;
  s.changed_screen = true;
  return s;
}

Outcome subgoal_monotonicity() {
  TaskSpec task;
  task.task_id = "saved_then_left";
  task.app = "app";
  task.kind = TaskKind::kOperation;
  task.human_steps = 5;
  SubGoalSpec goal;
  goal.name = "saved";
  NodePredicate p;
  p.text.push_back({StringOp::kEquals, "Saved"});
  goal.predicate = p;
  task.sub_goals = {goal};

  const std::vector<std::string> pages = {"List", "Editor", "Editor", "Saved", "List", "Home", "Home"};
  Trace full;
  for (std::size_t i = 0; i < pages.size(); ++i) full.steps.push_back(page_step(static_cast<int>(i), pages[i]));
  Trace truncated = full;
  truncated.steps.resize(3);  // stops before the evidence

  const EvalResult a = evaluate(task, full);
  const EvalResult b = evaluate(task, truncated);
  const bool pass = a.completed && !b.completed && a.sub_goal_flags[0].satisfied_at_step == std::optional<int>(3);
  return {pass, std::string("full trace completed=") + (a.completed ? "true" : "false") + ", truncated completed=" +
                    (b.completed ? "true" : "false")};
}

// ---- 8: gesture classifier table ---------------------------------------------------

Outcome gesture_table() {
  const GestureParams params;  // radius 24 px, long press 600 ms
  struct Case {
    int dx, dy;
    std::int64_t ms;
    GestureKind kind;
    Direction dir;
  };
  const auto T = GestureKind::kTap, L = GestureKind::kLongPress, S = GestureKind::kSwipe;
  const auto U = Direction::kUp, D = Direction::kDown, Le = Direction::kLeft, R = Direction::kRight;
  // Expected values written by hand from the rule: within the radius (inclusive)
  // a press shorter than the long-press time is a tap, otherwise a long press;
  // outside it the dominant axis decides, ties counted as vertical.
  const std::vector<Case> table = {
      {0, 0, 0, T, U},        {0, 0, 1, T, U},       {0, 0, 599, T, U},     {0, 0, 600, L, U},
      {0, 0, 601, L, U},      {0, 0, 5000, L, U},    {24, 0, 100, T, U},    {0, 24, 100, T, U},
      {-24, 0, 100, T, U},    {0, -24, 100, T, U},   {24, 0, 600, L, U},    {25, 0, 100, S, R},
      {-25, 0, 100, S, Le},   {0, 25, 100, S, D},    {0, -25, 100, S, U},   {25, 0, 600, S, R},
      {16, 17, 100, T, U},    {17, 17, 100, S, D},   {17, 16, 600, L, U},   {18, 17, 100, S, R},
      {17, 18, 100, S, D},    {-17, -18, 100, S, U}, {-18, -17, 100, S, Le}, {14, 19, 599, T, U},
      {15, 19, 100, S, D},    {19, 15, 100, S, R},   {10, 10, 599, T, U},   {10, 10, 600, L, U},
      {-10, 20, 700, L, U},   {100, 100, 100, S, D}, {-100, 100, 100, S, D}, {100, -100, 100, S, U},
      {-100, -100, 100, S, U}, {101, 100, 100, S, R}, {-101, 100, 100, S, Le}, {0, -900, 250, S, U},
      {0, 1200, 250, S, D},   {-700, 50, 250, S, Le}, {700, -50, 250, S, R},  {0, -900, 3000, S, U},
      {300, 0, 1, S, R},      {0, -2399, 400, S, U}, {-1079, 0, 400, S, Le}, {23, 0, 10000, L, U},
      {0, 23, 599, T, U},     {-23, -1, 599, T, U},  {1, -23, 600, L, U},   {24, 1, 100, S, R},
      {-1, 24, 100, S, D},    {-24, -1, 599, S, Le},
  };
  int disagreements = 0;
  std::string first_bad;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& c = table[i];
    const int x0 = 540, y0 = 1200;
    std::vector<TouchEvent> ev = {{TouchKind::kDown, x0, y0, 1000},
                                  {TouchKind::kMove, x0 + c.dx / 2, y0 + c.dy / 2, 1000 + c.ms / 2},
                                  {TouchKind::kUp, x0 + c.dx, y0 + c.dy, 1000 + c.ms}};
    const Gesture g = classify_gesture(ev, params);
    const bool ok = g.kind == c.kind && (c.kind != S || g.direction == c.dir);
    if (!ok) {
      ++disagreements;
      if (first_bad.empty()) first_bad = " first at row " + std::to_string(i);
    }
  }
  return {table.size() == 50 && disagreements == 0,
          std::to_string(table.size()) + " cases, " + std::to_string(disagreements) + " disagreements" + first_bad};
}

// ---- 9: demo trace export alignment ------------------------------------------------

Outcome export_alignment() {
  int traces = 0, samples = 0, bad = 0;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(kSource / "data" / "demo_traces"))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    ++traces;
    const ExportResult xml = export_training_samples(d, ExportMode::kXml);
    const ExportResult som = export_training_samples(d, ExportMode::kSom);
    bool ok = !xml.xml.empty() && xml.xml.size() == som.som.size();
    for (std::size_t k = 0; ok && k < xml.xml.size(); ++k) {
      const auto& a = xml.xml[k];
      const auto& b = som.som[k];
      ok = a.sample_id == b.sample_id && a.target == b.target && a.element_indices == b.element_indices &&
           b.legend.size() == b.element_indices.size();
      for (std::size_t i = 0; ok && i < b.legend.size(); ++i) ok = b.legend[i].at("index") == b.element_indices[i];
    }
    samples += static_cast<int>(xml.xml.size());
    if (!ok) ++bad;
  }
  return {traces > 0 && bad == 0, std::to_string(traces) + " traces, " + std::to_string(samples) +
                                      " samples per mode, " + std::to_string(bad) + " misaligned"};
}

// ---- 10: deterministic report ------------------------------------------------------

Outcome deterministic_report() {
  TempDir a, b;
  RandomClient r1(42), r2(42);
  run_suite(sim_suite(a.path()), r1);
  auto cfg = sim_suite(b.path());
  cfg.parallelism = 3;
  run_suite(cfg, r2);
  const std::string ja = read_text_file(a.path() / "report.json");
  const std::string jb = read_text_file(b.path() / "report.json");
  return {!ja.empty() && ja == jb, std::to_string(ja.size()) + " bytes, " + (ja == jb ? "identical" : "different")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  criterion("metric_arithmetic", metric_arithmetic);
  criterion("rrr_suppression", rrr_suppression);
  criterion("oracle_end_to_end", oracle_end_to_end);
  criterion("som_alignment", som_alignment);
  criterion("action_round_trip", action_round_trip);
  criterion("step_cap", step_cap);
  criterion("subgoal_monotonicity", subgoal_monotonicity);
  criterion("gesture_table", gesture_table);
  criterion("export_alignment", export_alignment);
  criterion("deterministic_report", deterministic_report);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
