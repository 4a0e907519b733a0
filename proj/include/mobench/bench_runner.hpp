#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mobench/agent.hpp"
#include "mobench/device.hpp"
#include "mobench/evaluation.hpp"
#include "mobench/metrics.hpp"
#include "mobench/task.hpp"

namespace mobench {

// A suite directory holds apps/*.json (sim app definitions) and tasks/*.json.
struct SuiteConfig {
  std::filesystem::path suite_dir;
  // Overrides suite_dir/tasks when nonempty; entries may be files or directories.
  std::vector<std::filesystem::path> task_paths;
  EpisodeConfig episode;
  DeviceConfig device;
  // adb only: one serial per worker. Empty means device.serial.
  std::vector<std::string> serials;
  int parallelism = 1;
  std::filesystem::path output_dir = "out";
  bool resume = false;

  std::filesystem::path apps_dir() const { return suite_dir / "apps"; }
};

using DeviceFactory = std::function<DeviceHandle(int worker)>;

struct SuiteRun {
  MetricsReport report;
  std::vector<EvalResult> results;  // sorted by task_id
  int executed = 0;
  int skipped = 0;
};

std::vector<TaskSpec> load_suite_tasks(const SuiteConfig& cfg);

// Runs every task, persists traces and results under output_dir, writes
// report.json (deterministic) and run_meta.json (timestamps, settings).
// Model endpoint failures abort the run; finished tasks stay on disk.
SuiteRun run_suite(const SuiteConfig& cfg, LlmClient& llm, LlmClient* judge = nullptr,
                   DeviceFactory devices = nullptr);

std::vector<Diagnostic> validate_suite(const std::filesystem::path& suite_dir);

// ---- persistence --------------------------------------------------------------

// Writes trace.jsonl and steps/ under dir. Returns the trace.jsonl path.
std::filesystem::path write_trace(const Trace& trace, const std::filesystem::path& dir);

struct TraceLine {
  int step_index = 0;
  std::string action;
  std::string grounded;
  std::string model_raw;
  bool changed_screen = false;
  std::string pre_xml;
  std::string post_xml;
  std::string som_png;
  std::string foreground_app;
  std::int64_t timestamp = 0;
};

struct StoredTrace {
  std::string task_id;
  std::vector<TraceLine> steps;
  std::optional<std::string> finish_answer;
  Termination termination = Termination::kFinished;
  std::string error;
};

StoredTrace read_trace(const std::filesystem::path& trace_jsonl);

// Atomic replace: write to a sibling temp file, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

std::vector<EvalResult> load_results(const std::filesystem::path& output_dir);

}  // namespace mobench
