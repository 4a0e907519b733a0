#include "mobench/bench_runner.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mobench/errors.hpp"
#include "mobench/sim.hpp"

namespace mobench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- files ----------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

// ---- traces ----------------------------------------------------------------------------

fs::path write_trace(const Trace& trace, const fs::path& dir) {
  const fs::path steps_dir = dir / "steps";
  fs::create_directories(steps_dir);
  std::string lines;
  // Observation k is the pre-state of step k; the last post-state gets index n.
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const Step& s = trace.steps[i];
    const std::string pre = "steps/" + std::to_string(i) + ".xml";
    write_file_atomic(dir / pre, write_hierarchy_xml(s.pre_observation->tree));
    std::string post = pre;
    if (!is_finish(s.action)) {
      post = "steps/" + std::to_string(i + 1) + ".xml";
      if (i + 1 == trace.steps.size()) write_file_atomic(dir / post, write_hierarchy_xml(s.post_observation->tree));
    }
    json line = {{"step_index", s.step_index},
                 {"action", serialize_action(s.action)},
                 {"grounded", describe(s.grounded)},
                 {"model_raw", s.model_raw},
                 {"changed_screen", s.changed_screen},
                 {"pre_xml", pre},
                 {"post_xml", post},
                 {"foreground_app", s.pre_observation->foreground_app},
                 {"timestamp", s.pre_observation->capture_timestamp}};
    if (s.som) {
      const std::string png = "steps/" + std::to_string(i) + ".png";
      write_bytes(dir / png, s.som->png);
      write_file_atomic(dir / ("steps/" + std::to_string(i) + ".legend.json"), legend_to_json(s.som->legend).dump() + "\n");
      line["som_png"] = png;
    }
    lines += line.dump() + "\n";
  }
  json last = {{"task_id", trace.task_id},
               {"termination", termination_name(trace.termination)},
               {"finish_answer", trace.finish_answer ? json(*trace.finish_answer) : json()}};
  if (!trace.error.empty()) last["error"] = trace.error;
  lines += last.dump() + "\n";
  const fs::path path = dir / "trace.jsonl";
  write_file_atomic(path, lines);
  return path;
}

StoredTrace read_trace(const fs::path& trace_jsonl) {
  std::istringstream in(read_text_file(trace_jsonl));
  StoredTrace t;
  std::string line;
  int lineno = 0;
  bool saw_tail = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kCorruptTrace, trace_jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("termination")) {
      t.task_id = j.value("task_id", "");
      t.termination = parse_termination(j["termination"].get<std::string>());
      if (j.contains("finish_answer") && !j["finish_answer"].is_null()) t.finish_answer = j["finish_answer"].get<std::string>();
      t.error = j.value("error", "");
      saw_tail = true;
      continue;
    }
    TraceLine s;
    s.step_index = j.at("step_index").get<int>();
    s.action = j.at("action").get<std::string>();
    s.grounded = j.value("grounded", "");
    s.model_raw = j.value("model_raw", "");
    s.changed_screen = j.value("changed_screen", false);
    s.pre_xml = j.value("pre_xml", "");
    s.post_xml = j.value("post_xml", "");
    s.som_png = j.value("som_png", "");
    s.foreground_app = j.value("foreground_app", "");
    s.timestamp = j.value("timestamp", std::int64_t{0});
    t.steps.push_back(std::move(s));
  }
  if (!saw_tail) throw Error(ErrorKind::kCorruptTrace, trace_jsonl.string() + ": missing termination line");
  return t;
}

// ---- suite ------------------------------------------------------------------------------

std::vector<TaskSpec> load_suite_tasks(const SuiteConfig& cfg) {
  std::vector<TaskSpec> tasks;
  if (cfg.task_paths.empty()) {
    tasks = load_tasks(cfg.suite_dir / "tasks");
  } else {
    for (const auto& p : cfg.task_paths) {
      auto more = load_tasks(p);
      tasks.insert(tasks.end(), more.begin(), more.end());
    }
  }
  std::set<std::string> ids;
  for (const auto& t : tasks)
    if (!ids.insert(t.task_id).second) throw Error(ErrorKind::kConfig, "duplicate task_id " + t.task_id);
  std::sort(tasks.begin(), tasks.end(), [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; });
  return tasks;
}

std::vector<EvalResult> load_results(const fs::path& output_dir) {
  std::vector<EvalResult> out;
  if (!fs::is_directory(output_dir)) throw Error(ErrorKind::kIo, "no output directory " + output_dir.string());
  for (const auto& e : fs::directory_iterator(output_dir)) {
    const fs::path r = e.path() / "result.json";
    if (e.is_directory() && fs::exists(r)) out.push_back(EvalResult::from_json(json::parse(read_text_file(r))));
  }
  std::sort(out.begin(), out.end(), [](const EvalResult& a, const EvalResult& b) { return a.task_id < b.task_id; });
  return out;
}

namespace {

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool safe_task_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; });
}

}  // namespace

SuiteRun run_suite(const SuiteConfig& cfg, LlmClient& llm, LlmClient* judge, DeviceFactory devices) {
  cfg.episode.validate();
  cfg.device.validate();
  if (cfg.parallelism < 1) throw Error(ErrorKind::kConfig, "parallelism must be >= 1");
  const auto tasks = load_suite_tasks(cfg);
  if (tasks.empty()) throw Error(ErrorKind::kConfig, "suite has no tasks");
  for (const auto& t : tasks)
    if (!safe_task_id(t.task_id)) throw Error(ErrorKind::kConfig, "task_id '" + t.task_id + "' is not usable as a directory name");

  if (!devices) {
    if (cfg.device.backend == Backend::kSim) {
      auto registry = SimAppRegistry::load_dir(cfg.device.sim_apps_dir.empty() ? cfg.apps_dir() : cfg.device.sim_apps_dir);
      devices = [registry, dc = cfg.device](int) { return setup(dc, registry); };
    } else {
      const int available = cfg.serials.empty() ? 1 : static_cast<int>(cfg.serials.size());
      if (cfg.parallelism > available)
        throw Error(ErrorKind::kConfig, "parallelism " + std::to_string(cfg.parallelism) + " exceeds the " +
                                            std::to_string(available) + " device serial(s) given");
      devices = [serials = cfg.serials, dc = cfg.device](int worker) {
        DeviceConfig c = dc;
        if (!serials.empty()) c.serial = serials[static_cast<std::size_t>(worker)];
        return setup(c);
      };
    }
  }

  fs::create_directories(cfg.output_dir);
  const std::string started = utc_now();
  const int workers = std::min<int>(cfg.parallelism, static_cast<int>(tasks.size()));

  std::vector<std::optional<EvalResult>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<int> executed{0}, skipped{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto work = [&](int worker) {
    try {
      DeviceHandle device;
      while (!stop) {
        const std::size_t i = next++;
        if (i >= tasks.size()) break;
        const TaskSpec& task = tasks[i];
        const fs::path dir = cfg.output_dir / task.task_id;
        const fs::path result_path = dir / "result.json";
        if (cfg.resume && fs::exists(result_path)) {
          try {
            read_trace(dir / "trace.jsonl");
            results[i] = EvalResult::from_json(json::parse(read_text_file(result_path)));
            ++skipped;
            continue;
          } catch (const std::exception& e) {
            spdlog::warn("{}: stored run unusable ({}); running again", task.task_id, e.what());
          }
        }
        if (!device) device = devices(worker);
        spdlog::info("[{}] {} ({})", worker, task.task_id, task.app);
        Trace trace;
        trace.task_id = task.task_id;
        try {
          device->reset(task.app, task.env_fixture);
          trace = run_episode(cfg.episode, task, *device, llm);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::kEndpointError || e.kind() == ErrorKind::kConfig) throw;
          trace.termination = Termination::kDeviceError;
          trace.error = e.what();
        }
        EvalResult r = evaluate(task, trace, judge, cfg.episode.retry);
        fs::remove_all(dir);
        write_trace(trace, dir);  // the trace lands before the result
        write_file_atomic(result_path, r.to_json().dump(2) + "\n");
        spdlog::info("[{}] {} -> {} ({} steps, {})", worker, task.task_id, r.completed ? "completed" : "not completed",
                     r.steps_taken, termination_name(r.termination));
        results[i] = std::move(r);
        ++executed;
      }
    } catch (...) {
      std::lock_guard lock(err_mu);
      if (!first_error) first_error = std::current_exception();
      stop = true;
    }
  };

  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SuiteRun run;
  for (auto& r : results) run.results.push_back(std::move(*r));
  run.executed = executed;
  run.skipped = skipped;
  run.report = aggregate(run.results);
  write_file_atomic(cfg.output_dir / "report.json", report_json(run.report).dump(2) + "\n");
  json meta = {{"started_at", started},
               {"finished_at", utc_now()},
               {"mode", mode_name(cfg.episode.mode)},
               {"framework", framework_name(cfg.episode.framework)},
               {"max_steps", cfg.episode.max_steps},
               {"backend", cfg.device.backend == Backend::kSim ? "sim" : "adb"},
               {"step_interval", cfg.device.step_interval},
               {"parallelism", cfg.parallelism},
               {"model", cfg.episode.model.model},
               {"executed", run.executed},
               {"skipped", run.skipped}};
  write_file_atomic(cfg.output_dir / "run_meta.json", meta.dump(2) + "\n");
  return run;
}

// ---- validation ---------------------------------------------------------------------------

std::vector<Diagnostic> validate_suite(const fs::path& suite_dir) {
  std::vector<Diagnostic> out;
  const fs::path tasks_dir = suite_dir / "tasks", apps_dir = suite_dir / "apps";
  if (!fs::is_directory(tasks_dir)) {
    out.push_back({tasks_dir.string(), 0, "missing tasks directory"});
    return out;
  }

  std::map<std::string, SimApp> apps;
  if (fs::is_directory(apps_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(apps_dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string text = read_text_file(f);
      try {
        SimApp app = SimApp::from_json(json::parse(text));
        for (const auto& p : app.check()) out.push_back({f.string(), 0, p});
        if (apps.count(app.app_id)) out.push_back({f.string(), 0, "duplicate app_id " + app.app_id});
        apps.emplace(app.app_id, std::move(app));
      } catch (const json::parse_error& e) {
        out.push_back({f.string(), 0, std::string("JSON syntax: ") + e.what()});
      } catch (const std::exception& e) {
        out.push_back({f.string(), 0, e.what()});
      }
    }
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(tasks_dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) out.push_back({tasks_dir.string(), 0, "no task files"});
  std::map<std::string, std::string> ids;
  for (const auto& f : files) {
    const std::string text = read_text_file(f);
    auto diags = validate_task_json(f.string(), text);
    if (!diags.empty()) {
      out.insert(out.end(), diags.begin(), diags.end());
      continue;
    }
    const TaskSpec t = TaskSpec::from_json(json::parse(text));
    auto line_of = [&](const std::string& needle) {
      auto pos = text.find("\"" + needle + "\"");
      return pos == std::string::npos ? 0 : 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    };
    if (auto [it, fresh] = ids.emplace(t.task_id, f.string()); !fresh)
      out.push_back({f.string(), line_of(t.task_id), "task_id '" + t.task_id + "' also used by " + it->second});
    if (!apps.empty()) {
      auto app = apps.find(t.app);
      if (app == apps.end())
        out.push_back({f.string(), line_of(t.app), "unknown app '" + t.app + "'"});
      else if (!app->second.fixtures.count(t.env_fixture))
        out.push_back({f.string(), line_of(t.env_fixture), "app '" + t.app + "' has no fixture '" + t.env_fixture + "'"});
    }
  }
  return out;
}

}  // namespace mobench
