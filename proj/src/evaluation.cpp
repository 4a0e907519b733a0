#include "mobench/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include "mobench/errors.hpp"

namespace mobench {

using nlohmann::json;

int EvalResult::satisfied_count() const {
  return static_cast<int>(std::count_if(sub_goal_flags.begin(), sub_goal_flags.end(),
                                        [](const SubGoalFlag& f) { return f.satisfied_at_step.has_value(); }));
}

json EvalResult::to_json() const {
  json flags = json::array();
  for (const auto& f : sub_goal_flags)
    flags.push_back({{"name", f.name}, {"satisfied_at_step", f.satisfied_at_step ? json(*f.satisfied_at_step) : json()}});
  json j = {{"task_id", task_id},
            {"app", app},
            {"kind", task_kind_name(kind)},
            {"human_steps", human_steps},
            {"completed", completed},
            {"sub_goal_flags", flags},
            {"answer_correct", answer_correct ? json(*answer_correct) : json()},
            {"answer", answer ? json(*answer) : json()},
            {"steps_taken", steps_taken},
            {"changed_flags", changed_flags},
            {"termination", termination_name(termination)}};
  if (!error.empty()) j["error"] = error;
  return j;
}

EvalResult EvalResult::from_json(const json& j) {
  EvalResult r;
  r.task_id = j.at("task_id").get<std::string>();
  r.app = j.value("app", "");
  r.kind = j.value("kind", "operation") == "query" ? TaskKind::kQuery : TaskKind::kOperation;
  r.human_steps = j.value("human_steps", 1);
  r.completed = j.at("completed").get<bool>();
  for (const auto& f : j.value("sub_goal_flags", json::array())) {
    SubGoalFlag flag{f.at("name").get<std::string>(), {}};
    if (f.contains("satisfied_at_step") && !f["satisfied_at_step"].is_null())
      flag.satisfied_at_step = f["satisfied_at_step"].get<int>();
    r.sub_goal_flags.push_back(std::move(flag));
  }
  if (j.contains("answer_correct") && !j["answer_correct"].is_null()) r.answer_correct = j["answer_correct"].get<bool>();
  if (j.contains("answer") && !j["answer"].is_null()) r.answer = j["answer"].get<std::string>();
  r.steps_taken = j.value("steps_taken", 0);
  r.changed_flags = j.value("changed_flags", std::vector<bool>{});
  r.termination = parse_termination(j.value("termination", "finished"));
  r.error = j.value("error", "");
  return r;
}

// ---- sub-goals --------------------------------------------------------------------------

bool subgoal_holds(const SubGoalSpec& goal, const Observation& obs) {
  if (goal.predicate) {
    const auto matches = match_predicate(obs.tree, *goal.predicate);
    if (static_cast<int>(matches.size()) < goal.predicate->min_count) return false;
  }
  if (goal.state_probe) {
    if (!obs.state || !goal.state_probe->holds(*obs.state)) return false;
  }
  return goal.predicate || goal.state_probe;
}

std::vector<SubGoalFlag> check_subgoals(const TaskSpec& task, const Trace& trace) {
  std::vector<SubGoalFlag> flags;
  std::map<std::string, std::size_t> by_name;
  for (const auto& g : task.sub_goals) {
    by_name[g.name] = flags.size();
    flags.push_back({g.name, std::nullopt});
  }
  for (const auto& step : trace.steps) {
    // A Finish step's post-observation is its pre-observation; nothing new to see.
    if (is_finish(step.action) || !step.post_observation) continue;
    for (std::size_t i = 0; i < task.sub_goals.size(); ++i) {
      if (flags[i].satisfied_at_step) continue;
      const auto& g = task.sub_goals[i];
      if (g.ordered_after) {
        auto p = by_name.find(*g.ordered_after);
        if (p == by_name.end() || !flags[p->second].satisfied_at_step) continue;
      }
      if (subgoal_holds(g, *step.post_observation)) flags[i].satisfied_at_step = step.step_index;
    }
  }
  return flags;
}

// ---- query answers ---------------------------------------------------------------------

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    // Keep decimal points and percent signs that belong to numbers.
    const bool numeric_dot = c == '.' && i > 0 && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
                             std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (c >= 0x80 || std::isalnum(c) || numeric_dot || c == '%') {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else {
      space = true;
    }
  }
  return out;
}

namespace {

const std::map<std::string, std::string>& unit_table() {
  static const std::map<std::string, std::string> t = {
      {"km", "km"},        {"kilometer", "km"}, {"kilometers", "km"}, {"kilometre", "km"}, {"kilometres", "km"},
      {"m", "m"},          {"meter", "m"},      {"meters", "m"},      {"metre", "m"},      {"metres", "m"},
      {"min", "min"},      {"mins", "min"},     {"minute", "min"},    {"minutes", "min"},  {"h", "h"},
      {"hr", "h"},         {"hrs", "h"},        {"hour", "h"},        {"hours", "h"},      {"s", "s"},
      {"sec", "s"},        {"secs", "s"},       {"second", "s"},      {"seconds", "s"},    {"yuan", "cny"},
      {"cny", "cny"},      {"rmb", "cny"},      {"%", "%"},           {"percent", "%"},    {"usd", "usd"},
      {"dollar", "usd"},   {"dollars", "usd"},  {"kg", "kg"},         {"g", "g"},          {"day", "day"},
      {"days", "day"},     {"page", "page"},    {"pages", "page"},
  };
  return t;
}

std::string canonical_number(std::string n) {
  n.erase(std::remove(n.begin(), n.end(), ','), n.end());
  if (n.find('.') != std::string::npos) {
    while (n.back() == '0') n.pop_back();
    if (n.back() == '.') n.pop_back();
  }
  auto nz = n.find_first_not_of('0');
  if (nz == std::string::npos) return "0";
  if (n[nz] == '.') --nz;
  return n.substr(nz);
}

}  // namespace

std::vector<Quantity> extract_quantities(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  static const std::regex re(R"((\d{1,3}(?:,\d{3})+|\d+)(\.\d+)?\s*(%|[a-z]+)?)");
  std::vector<Quantity> out;
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    Quantity q;
    q.number = canonical_number(m[1].str() + m[2].str());
    if (m[3].matched) {
      auto u = unit_table().find(m[3].str());
      if (u != unit_table().end()) q.unit = u->second;
    }
    out.push_back(std::move(q));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<bool> judge_fallback(const std::string& gold, const std::string& predicted) {
  const std::string g = normalize_answer(gold), p = normalize_answer(predicted);
  if (!g.empty() && g == p) return true;
  const auto gq = extract_quantities(gold);
  if (gq.empty()) return std::nullopt;
  // Quantity sets decide only when the gold answer is nothing but quantities
  // with units, or a bare number.
  static const std::regex bare_number(R"(^\d+(\.\d+)?$)");
  const bool all_units = std::all_of(gq.begin(), gq.end(), [](const Quantity& q) { return !q.unit.empty(); });
  if (std::regex_match(g, bare_number)) {
    // A bare number matches a prediction that states exactly that one number, any unit.
    const auto pq = extract_quantities(predicted);
    if (pq.size() == 1 && pq[0].number == gq[0].number) return true;
    return std::nullopt;
  }
  if (!all_units) return std::nullopt;
  if (extract_quantities(predicted) == gq) return true;
  return std::nullopt;
}

std::string judge_prompt(const std::string& gold, const std::string& predicted, const std::string& instruction) {
  return "You are grading the answer of a phone assistant.\n"
         "Question: " + instruction + "\n"
         "Reference answer: " + gold + "\n"
         "Assistant answer: " + predicted + "\n\n"
         "Does the assistant answer state the same facts as the reference answer? Formatting, units spelled out, "
         "and extra politeness do not matter; missing or different values do. Reply with CORRECT or INCORRECT as "
         "the first word.";
}

bool judge_query(const std::string& gold, const std::optional<std::string>& predicted, LlmClient* judge,
                 const std::string& instruction, const RetryPolicy& retry) {
  if (!predicted) return false;
  if (auto decided = judge_fallback(gold, *predicted)) return *decided;
  if (!judge) return false;
  ChatRequest req;
  req.messages.push_back(ChatMessage::text("user", judge_prompt(gold, *predicted, instruction)));
  std::string reply = llm_call(*judge, req, retry);
  auto start = reply.find_first_not_of(" \t\r\n*\"'`");
  std::string head = start == std::string::npos ? "" : reply.substr(start, 9);
  for (auto& c : head) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (head.rfind("INCORRECT", 0) == 0) return false;
  if (head.rfind("CORRECT", 0) == 0) return true;
  spdlog::warn("judge reply does not start with CORRECT/INCORRECT; counted as incorrect: {}", reply.substr(0, 80));
  return false;
}

EvalResult evaluate(const TaskSpec& task, const Trace& trace, LlmClient* judge, const RetryPolicy& retry) {
  EvalResult r;
  r.task_id = task.task_id;
  r.app = task.app;
  r.kind = task.kind;
  r.human_steps = task.human_steps;
  r.steps_taken = static_cast<int>(trace.steps.size());
  r.termination = trace.termination;
  r.error = trace.error;
  r.answer = trace.finish_answer;
  for (const auto& s : trace.steps)
    if (!is_finish(s.action)) r.changed_flags.push_back(s.changed_screen);
  if (task.kind == TaskKind::kOperation) {
    r.sub_goal_flags = check_subgoals(task, trace);
    r.completed = !r.sub_goal_flags.empty() && r.satisfied_count() == static_cast<int>(r.sub_goal_flags.size());
  } else {
    r.answer_correct = judge_query(task.gold_answer.value_or(""), trace.finish_answer, judge, task.instruction, retry);
    r.completed = *r.answer_correct;
  }
  return r;
}

}  // namespace mobench
