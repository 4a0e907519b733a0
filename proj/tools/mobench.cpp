// mobench command-line tool: run, validate, report, record, export, expand.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "mobench/bench_runner.hpp"
#include "mobench/errors.hpp"
#include "mobench/recorder.hpp"
#include "mobench/sim.hpp"

using namespace mobench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct EndpointOpts {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout = 120;

  void add(CLI::App* cmd, const std::string& prefix = "") {
    cmd->add_option("--" + prefix + "base-url", base_url, "Chat-completions base URL")->capture_default_str();
    cmd->add_option("--" + prefix + "model", model, "Model name");
    cmd->add_option("--" + prefix + "api-key-env", api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    cmd->add_option("--" + prefix + "timeout", timeout, "Request timeout in seconds")->capture_default_str();
  }
  EndpointDescriptor descriptor() const { return {base_url, model, api_key_env, timeout}; }
};

struct DeviceOpts {
  std::string backend = "sim";
  std::vector<std::string> serials;
  double step_interval = 3.0;
  int width = 1080;
  int height = 2400;
  std::string fixed_time;
  std::string adb = "adb";

  void add(CLI::App* cmd) {
    cmd->add_option("--device", backend, "Device backend")->check(CLI::IsMember({"sim", "adb"}))->capture_default_str();
    cmd->add_option("--serial", serials, "adb serial; repeat for one device per worker");
    cmd->add_option("--step-interval", step_interval, "Seconds to wait after each action")->capture_default_str();
    cmd->add_option("--screen-width", width)->capture_default_str();
    cmd->add_option("--screen-height", height)->capture_default_str();
    cmd->add_option("--fixed-time", fixed_time, "Device clock, YYYY-MM-DDTHH:MM");
    cmd->add_option("--adb", adb, "adb binary")->capture_default_str();
  }
  DeviceConfig config(const fs::path& suite_dir) const {
    DeviceConfig c;
    c.backend = backend == "adb" ? Backend::kAdb : Backend::kSim;
    if (!serials.empty()) c.serial = serials.front();
    c.step_interval = step_interval;
    c.screen_width = width;
    c.screen_height = height;
    if (!fixed_time.empty()) c.fixed_time = fixed_time;
    c.adb_path = adb;
    if (!suite_dir.empty()) c.sim_apps_dir = suite_dir / "apps";
    return c;
  }
};

// ---- run ---------------------------------------------------------------------------------

struct RunOpts {
  fs::path suite;
  std::vector<fs::path> tasks;
  std::string mode = "xml";
  std::string framework = "direct";
  int max_steps = 25;
  int parallel = 1;
  fs::path out = "out";
  bool resume = false;
  std::string agent = "llm";
  std::uint64_t seed = 0;
  int history_window = 0;
  fs::path prompts;
  bool verbose = false;
  bool judge = true;
  EndpointOpts model;
  EndpointOpts judge_model;
  DeviceOpts device;
  std::string format = "table";
};

int cmd_run(const RunOpts& o) {
  SuiteConfig cfg;
  cfg.suite_dir = o.suite;
  cfg.task_paths = o.tasks;
  cfg.episode.mode = parse_mode(o.mode);
  cfg.episode.framework = parse_framework(o.framework);
  cfg.episode.max_steps = o.max_steps;
  cfg.episode.history_window = o.history_window;
  cfg.episode.model = o.model.descriptor();
  if (!o.prompts.empty()) cfg.episode.templates = PromptTemplates::load_dir(o.prompts);
  cfg.device = o.device.config(o.suite);
  cfg.serials = o.device.serials;
  cfg.parallelism = o.parallel;
  cfg.output_dir = o.out;
  cfg.resume = o.resume;

  std::unique_ptr<LlmClient> llm;
  if (o.agent == "oracle") {
    llm = std::make_unique<OracleClient>(load_suite_tasks(cfg));
  } else if (o.agent == "random") {
    llm = std::make_unique<RandomClient>(o.seed);
  } else {
    if (o.model.model.empty()) throw Error(ErrorKind::kConfig, "--model is required with --agent llm");
    llm = std::make_unique<HttpLlmClient>(o.model.descriptor(), o.verbose);
  }
  std::unique_ptr<LlmClient> judge;
  if (o.judge && !o.judge_model.model.empty()) judge = std::make_unique<HttpLlmClient>(o.judge_model.descriptor(), o.verbose);
  else if (o.judge && o.agent == "llm") judge = std::make_unique<HttpLlmClient>(o.model.descriptor(), o.verbose);

  SuiteRun run = run_suite(cfg, *llm, judge.get());
  spdlog::info("{} task(s) executed, {} resumed from disk; results in {}", run.executed, run.skipped, o.out.string());
  std::cout << render_report(run.report, parse_report_format(o.format));
  return 0;
}

// ---- validate / report ----------------------------------------------------------------------

int cmd_validate(const fs::path& suite) {
  const auto diags = validate_suite(suite);
  for (const auto& d : diags) std::cout << format_diagnostic(d) << "\n";
  if (diags.empty()) std::cout << "ok: " << suite.string() << "\n";
  return diags.empty() ? 0 : 1;
}

int cmd_report(const fs::path& out, const std::string& format) {
  const auto results = load_results(out);
  if (results.empty()) throw Error(ErrorKind::kEmptyResults, "no result.json files under " + out.string());
  std::cout << report(results, parse_report_format(format));
  return 0;
}

// ---- record --------------------------------------------------------------------------------

struct RecordOpts {
  fs::path suite;
  fs::path root = "recordings";
  std::string host = "127.0.0.1";
  int port = 8765;
  bool no_screenshots = false;
  int tap_radius = 24;
  int long_press_ms = 600;
  bool getevent = false;
  std::string input_device;
  double touch_scale_x = 1.0;
  double touch_scale_y = 1.0;
  fs::path replay;
  std::string session_id;
  DeviceOpts device;
};

DeviceHandle open_device(const DeviceOpts& d, const fs::path& suite) {
  DeviceConfig cfg = d.config(suite);
  if (cfg.backend == Backend::kSim && suite.empty()) throw Error(ErrorKind::kConfig, "--suite is required for the sim backend");
  return setup(cfg);
}

// Drives a recording session through a task's gold script, as an annotator would.
int record_replay(Device& device, const RecordOpts& o) {
  const TaskSpec task = load_task(o.replay);
  device.reset(task.app, task.env_fixture);
  const std::string id = o.session_id.empty() ? task.task_id : o.session_id;
  if (fs::exists(o.root / id)) throw Error(ErrorKind::kConflict, "session directory exists: " + (o.root / id).string());
  RecordingSession s(id, task.instruction, task.app, device, o.root / id,
                     GestureParams{o.tap_radius, o.long_press_ms}, !o.no_screenshots);
  for (const auto& gold : task.gold_actions) {
    const RecordedStep step = s.begin_step();
    auto resolved = resolve_selectors(gold, *s.pending_view());
    if (!resolved) throw Error(ErrorKind::kPrecondition, "step " + std::to_string(step.step_index) + ": no element for " + gold);
    const Action a = parse_model_action(*resolved);
    if (is_finish(a)) {
      s.finish_session(std::get<act::Finish>(a).answer);
      break;
    }
    s.commit_step(a);
  }
  if (s.status() != SessionStatus::kFinished) s.finish_session();
  std::cout << (o.root / id / "traces" / "trace.jsonl").string() << "\n";
  return 0;
}

// Feeds real touches from `adb shell getevent -lt` into the waiting session.
void getevent_loop(RecorderServer& server, const RecordOpts& o) {
  std::string cmd = o.device.adb;
  if (!o.device.serials.empty()) cmd += " -s " + o.device.serials.front();
  cmd += " shell getevent -lt";
  if (!o.input_device.empty()) cmd += " " + o.input_device;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    spdlog::error("cannot start '{}'", cmd);
    return;
  }
  GeteventParser parser(o.touch_scale_x, o.touch_scale_y);
  char buf[512];
  while (!g_interrupted && std::fgets(buf, sizeof buf, pipe)) {
    auto events = parser.feed(buf);
    if (!events) continue;
    const auto list = server.handle("GET", "/sessions", "");
    const auto& active = list.body["active"];
    if (active.is_null()) {
      spdlog::warn("touch ignored: no session");
      continue;
    }
    json payload = {{"kind", "gesture"}, {"perform", false}, {"events", json::array()}};
    for (const auto& e : *events)
      payload["events"].push_back({{"kind", e.kind == TouchKind::kDown ? "down" : e.kind == TouchKind::kUp ? "up" : "move"},
                                   {"x", e.x},
                                   {"y", e.y},
                                   {"t", e.t}});
    const auto r = server.handle("POST", "/sessions/" + active.get<std::string>() + "/commit", payload.dump());
    if (r.status != 200) spdlog::warn("touch not recorded ({}): {}", r.status, r.body.value("error", ""));
    else spdlog::info("recorded {}", r.body["committed"].is_null() ? "raw step (no element hit)" : r.body["committed"].get<std::string>());
  }
  pclose(pipe);
}

int cmd_record(const RecordOpts& o) {
  DeviceHandle device = open_device(o.device, o.suite);
  fs::create_directories(o.root);
  if (!o.replay.empty()) return record_replay(*device, o);

  RecorderServerConfig cfg;
  cfg.root = o.root;
  cfg.gestures = {o.tap_radius, o.long_press_ms};
  cfg.screenshots = !o.no_screenshots;
  RecorderServer server(*device, cfg);
  const int port = server.start(o.host, o.port);
  std::cout << "recorder API on http://" << o.host << ":" << port << " (Ctrl-C to stop)" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread touches;
  if (o.getevent) touches = std::thread([&] { getevent_loop(server, o); });
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  if (touches.joinable()) touches.detach();  // blocked in fgets until adb exits
  return 0;
}

// ---- export / expand ------------------------------------------------------------------------

int cmd_export(const std::vector<fs::path>& sessions, const std::string& mode, const fs::path& out, const fs::path& redact_file) {
  RedactionList redact;
  if (!redact_file.empty()) redact = json::parse(read_text_file(redact_file)).get<RedactionList>();
  std::vector<fs::path> dirs;
  for (const auto& p : sessions) {
    if (fs::exists(p / "session.json")) {
      dirs.push_back(p);
      continue;
    }
    for (const auto& e : fs::directory_iterator(p))
      if (fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  const ExportMode m = parse_export_mode(mode);
  for (const char* f : {"xml.jsonl", "som.jsonl"}) fs::remove(out / f);
  int xml = 0, som = 0;
  for (const auto& d : dirs) {
    const ExportResult r = export_training_samples(d, m, out, redact);
    xml += static_cast<int>(r.xml.size());
    som += static_cast<int>(r.som.size());
    std::cout << d.filename().string() << ": "
              << (r.rejected ? "rejected, skipped"
                             : std::to_string(r.xml.size()) + " xml, " + std::to_string(r.som.size()) + " som, " +
                                   std::to_string(r.excluded_steps.size()) + " excluded")
              << "\n";
  }
  std::cout << "total: " << xml << " xml, " << som << " som samples in " << out.string() << "\n";
  return 0;
}

int cmd_expand(const fs::path& seeds_file, const std::string& app, int n, const std::string& description,
               const EndpointOpts& model, bool verbose) {
  std::vector<std::string> seeds;
  std::istringstream in(read_text_file(seeds_file));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) seeds.push_back(line);
  HttpLlmClient llm(model.descriptor(), verbose);
  const Expansion e = expand_tasks(seeds, llm, app, n, description);
  for (const auto& c : e.candidates) std::cout << c << "\n";
  std::cerr << e.candidates.size() << " candidate(s) for review, " << e.dropped << " duplicate(s) dropped\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobile GUI-agent benchmark harness"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging, including model request and response bodies");

  RunOpts run;
  auto* run_cmd = app.add_subcommand("run", "Run a task suite and report metrics");
  run_cmd->add_option("--suite", run.suite, "Suite directory (apps/ and tasks/)")->required();
  run_cmd->add_option("--tasks", run.tasks, "Task files or directories overriding <suite>/tasks");
  run_cmd->add_option("--mode", run.mode)->check(CLI::IsMember({"xml", "som"}))->capture_default_str();
  run_cmd->add_option("--framework", run.framework)->check(CLI::IsMember({"direct", "react", "seeact"}))->capture_default_str();
  run_cmd->add_option("--max-steps", run.max_steps)->capture_default_str();
  run_cmd->add_option("--parallel", run.parallel, "Concurrent episodes")->capture_default_str();
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_flag("--resume", run.resume, "Skip tasks that already have result.json");
  run_cmd->add_option("--agent", run.agent, "llm, or the built-in oracle/random policies")
      ->check(CLI::IsMember({"llm", "oracle", "random"}))
      ->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Random agent seed")->capture_default_str();
  run_cmd->add_option("--history-window", run.history_window, "Past steps shown to the model, 0 = all")->capture_default_str();
  run_cmd->add_option("--prompts", run.prompts, "Directory of prompt template overrides");
  run_cmd->add_flag("!--no-judge", run.judge, "Score queries by the string fallback only");
  run_cmd->add_option("--format", run.format)->check(CLI::IsMember({"table", "json", "csv"}))->capture_default_str();
  run.model.add(run_cmd);
  run.judge_model.add(run_cmd, "judge-");
  run.device.add(run_cmd);

  fs::path validate_suite_dir;
  auto* validate_cmd = app.add_subcommand("validate", "Check a suite's apps and task files");
  validate_cmd->add_option("--suite", validate_suite_dir)->required();

  fs::path report_out = "out";
  std::string report_format = "table";
  auto* report_cmd = app.add_subcommand("report", "Recompute metrics from a run directory");
  report_cmd->add_option("--out", report_out)->capture_default_str();
  report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"table", "json", "csv"}))->capture_default_str();

  RecordOpts rec;
  auto* record_cmd = app.add_subcommand("record", "Serve the recorder API for annotation, or replay a task script");
  record_cmd->add_option("--suite", rec.suite, "Suite directory providing sim apps");
  record_cmd->add_option("--root", rec.root, "Directory for session folders")->capture_default_str();
  record_cmd->add_option("--host", rec.host)->capture_default_str();
  record_cmd->add_option("--port", rec.port, "0 picks a free port")->capture_default_str();
  record_cmd->add_flag("--no-screenshots", rec.no_screenshots);
  record_cmd->add_option("--tap-radius", rec.tap_radius)->capture_default_str();
  record_cmd->add_option("--long-press-ms", rec.long_press_ms)->capture_default_str();
  record_cmd->add_flag("--getevent", rec.getevent, "Record touches made on the phone (adb backend)");
  record_cmd->add_option("--input-device", rec.input_device, "Touchscreen node, e.g. /dev/input/event2");
  record_cmd->add_option("--touch-scale-x", rec.touch_scale_x, "Screen px per touch unit")->capture_default_str();
  record_cmd->add_option("--touch-scale-y", rec.touch_scale_y)->capture_default_str();
  record_cmd->add_option("--replay", rec.replay, "Record a task's gold_actions without the API");
  record_cmd->add_option("--session-id", rec.session_id, "Session name for --replay");
  rec.device.step_interval = 0;
  rec.device.add(record_cmd);

  std::vector<fs::path> export_sessions;
  std::string export_mode = "both";
  fs::path export_out = "export";
  fs::path export_redact;
  auto* export_cmd = app.add_subcommand("export", "Turn recorded sessions into training samples");
  export_cmd->add_option("sessions", export_sessions, "Session directories or folders of sessions")->required();
  export_cmd->add_option("--mode", export_mode)->check(CLI::IsMember({"xml", "som", "both"}))->capture_default_str();
  export_cmd->add_option("--out", export_out)->capture_default_str();
  export_cmd->add_option("--redact", export_redact, "JSON object: app -> resource-id suffixes to mask");

  fs::path review_dir;
  std::string review_verdict, reviewer, review_note;
  auto* review_cmd = app.add_subcommand("review", "Record a cross-check verdict on a finished session");
  review_cmd->add_option("session", review_dir)->required();
  review_cmd->add_option("--verdict", review_verdict)->check(CLI::IsMember({"verified", "rejected"}))->required();
  review_cmd->add_option("--reviewer", reviewer);
  review_cmd->add_option("--note", review_note);

  fs::path seeds_file;
  std::string expand_app, expand_desc;
  int expand_n = 10;
  EndpointOpts expand_model;
  auto* expand_cmd = app.add_subcommand("expand", "Ask a model for new task instructions from seeds");
  expand_cmd->add_option("--seeds", seeds_file, "One seed instruction per line")->required();
  expand_cmd->add_option("--app", expand_app)->required();
  expand_cmd->add_option("-n", expand_n)->capture_default_str();
  expand_cmd->add_option("--description", expand_desc, "Short description of the app");
  expand_model.add(expand_cmd);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("mobench"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  run.verbose = verbose;

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(validate_suite_dir);
    if (*report_cmd) return cmd_report(report_out, report_format);
    if (*record_cmd) return cmd_record(rec);
    if (*export_cmd) return cmd_export(export_sessions, export_mode, export_out, export_redact);
    if (*review_cmd) {
      set_review(review_dir, parse_verdict(review_verdict), reviewer, review_note);
      return 0;
    }
    if (*expand_cmd) return cmd_expand(seeds_file, expand_app, expand_n, expand_desc, expand_model, verbose);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
