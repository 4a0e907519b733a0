#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mobench/ui_tree.hpp"

namespace mobench {

enum class TaskKind { kOperation, kQuery };

// Assertion over the simulator's key-value state (JSON pointer into
// {app_id: {...}, system: {...}}).
struct StateProbe {
  std::string path;
  std::optional<nlohmann::json> equals;
  std::optional<std::string> contains;      // substring of a string value
  std::optional<nlohmann::json> has_item;   // array element whose fields include these
  bool negate = false;

  bool holds(const nlohmann::json& state) const;
};

struct SubGoalSpec {
  std::string name;
  std::optional<NodePredicate> predicate;
  std::optional<StateProbe> state_probe;
  std::optional<std::string> ordered_after;
};

struct TaskSpec {
  std::string task_id;
  std::string app;
  std::string instruction;
  TaskKind kind = TaskKind::kOperation;
  std::vector<SubGoalSpec> sub_goals;
  std::optional<std::string> gold_answer;
  int human_steps = 1;
  std::string env_fixture = "default";
  // Reference path for the oracle agent, one serialized action per entry.
  // Element arguments may be selectors: @resource_id_leaf or #label.
  std::vector<std::string> gold_actions;

  static TaskSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::string_view task_kind_name(TaskKind k);

TaskSpec load_task(const std::filesystem::path& file);
// Sorted by file name; `path` may be a directory or a single file.
std::vector<TaskSpec> load_tasks(const std::filesystem::path& path);

struct Diagnostic {
  std::string file;
  int line = 0;  // 1-based; 0 when unknown
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

// Schema check of one task document. `text` is used to attach line numbers.
std::vector<Diagnostic> validate_task_json(const std::string& file, const std::string& text);

NodePredicate predicate_from_json(const nlohmann::json& j);
nlohmann::json predicate_to_json(const NodePredicate& p);

}  // namespace mobench
