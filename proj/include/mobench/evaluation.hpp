#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "mobench/agent.hpp"
#include "mobench/llm_client.hpp"
#include "mobench/task.hpp"

namespace mobench {

struct SubGoalFlag {
  std::string name;
  std::optional<int> satisfied_at_step;

  bool operator==(const SubGoalFlag&) const = default;
};

struct EvalResult {
  std::string task_id;
  std::string app;
  TaskKind kind = TaskKind::kOperation;
  int human_steps = 1;
  bool completed = false;
  std::vector<SubGoalFlag> sub_goal_flags;
  std::optional<bool> answer_correct;
  std::optional<std::string> answer;
  int steps_taken = 0;
  // One entry per performed operation; Finish steps are not operations.
  std::vector<bool> changed_flags;
  Termination termination = Termination::kFinished;
  std::string error;

  int satisfied_count() const;
  nlohmann::json to_json() const;
  static EvalResult from_json(const nlohmann::json& j);
  bool operator==(const EvalResult&) const = default;
};

// Does one observation satisfy the sub-goal's own condition (ignoring order)?
bool subgoal_holds(const SubGoalSpec& goal, const Observation& obs);

std::vector<SubGoalFlag> check_subgoals(const TaskSpec& task, const Trace& trace);

// Lowercase, punctuation to spaces, collapsed whitespace.
std::string normalize_answer(std::string_view s);

struct Quantity {
  std::string number;  // canonical decimal text, e.g. "7" for "7.0"
  std::string unit;    // canonical unit, may be empty
  auto operator<=>(const Quantity&) const = default;
};

std::vector<Quantity> extract_quantities(std::string_view s);

// Deterministic comparison only; nullopt means "undecided, ask a judge".
std::optional<bool> judge_fallback(const std::string& gold, const std::string& predicted);

std::string judge_prompt(const std::string& gold, const std::string& predicted, const std::string& instruction);

bool judge_query(const std::string& gold, const std::optional<std::string>& predicted, LlmClient* judge,
                 const std::string& instruction = {}, const RetryPolicy& retry = {});

EvalResult evaluate(const TaskSpec& task, const Trace& trace, LlmClient* judge = nullptr, const RetryPolicy& retry = {});

}  // namespace mobench
