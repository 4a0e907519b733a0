#include <doctest.h>

#include "mobench/errors.hpp"
#include "mobench/evaluation.hpp"
#include "support.hpp"

using namespace mobench;
using nlohmann::json;
using testsupport::button;
using testsupport::make_tree;

namespace {

// One step whose post-observation shows a single text node `page`.
Step step_showing(int index, const std::string& page, json state = json::object(), Action action = act::Back{}) {
  auto obs = std::make_shared<Observation>();
  auto label = testsupport::node("android.widget.TextView", {0, 300, 1080, 400});
  label.text = page;
  obs->tree = make_tree({label});
  obs->state = std::move(state);
  Step s;
  s.step_index = index;
  s.action = std::move(action);
  s.pre_observation = obs;
  s.post_observation = obs;
  s.changed_screen = true;
  return s;
}

SubGoalSpec page_goal(const std::string& name, const std::string& page, std::optional<std::string> after = {}) {
  SubGoalSpec g;
  g.name = name;
  NodePredicate p;
  p.text.push_back({StringOp::kEquals, page});
  g.predicate = p;
  g.ordered_after = std::move(after);
  return g;
}

Trace trace_of(const std::vector<std::string>& pages) {
  Trace t;
  for (std::size_t i = 0; i < pages.size(); ++i) t.steps.push_back(step_showing(static_cast<int>(i), pages[i]));
  return t;
}

TaskSpec op_task(std::vector<SubGoalSpec> goals) {
  TaskSpec t;
  t.task_id = "op";
  t.app = "app";
  t.kind = TaskKind::kOperation;
  t.sub_goals = std::move(goals);
  t.human_steps = 5;
  return t;
}

}  // namespace

TEST_CASE("all sub-goals matching the last page") {
  auto task = op_task({page_goal("a", "Done"), page_goal("b", "Done"), page_goal("c", "Done")});
  auto flags = check_subgoals(task, trace_of({"x", "y", "Done"}));
  for (const auto& f : flags) CHECK(f.satisfied_at_step == std::optional<int>(2));
  CHECK(evaluate(task, trace_of({"x", "y", "Done"})).completed);
}

TEST_CASE("evidence at an intermediate step stays satisfied") {
  auto task = op_task({page_goal("confirm", "Confirmation")});
  auto trace = trace_of({"a", "b", "c", "d", "Confirmation", "f", "g", "h", "home"});
  auto r = evaluate(task, trace);
  CHECK(r.completed);
  CHECK(r.sub_goal_flags[0].satisfied_at_step == std::optional<int>(4));
}

TEST_CASE("two of three satisfied") {
  auto task = op_task({page_goal("a", "A"), page_goal("b", "B"), page_goal("c", "C")});
  auto r = evaluate(task, trace_of({"A", "B"}));
  CHECK_FALSE(r.completed);
  CHECK(r.satisfied_count() == 2);
  CHECK_FALSE(r.sub_goal_flags[2].satisfied_at_step.has_value());
}

TEST_CASE("ordered_after walk by hand") {
  // Steps:   0      1        2        3      4         5
  // Pages:   -    child    child      -    parent    child
  // child matches at 1 and 2, but parent is satisfied only at 4, so child
  // waits for its re-match at 5.
  auto task = op_task({page_goal("parent", "P"), page_goal("child", "C", "parent")});
  auto flags = check_subgoals(task, trace_of({"-", "C", "C", "-", "P", "C"}));
  CHECK(flags[0].satisfied_at_step == std::optional<int>(4));
  CHECK(flags[1].satisfied_at_step == std::optional<int>(5));

  auto never = check_subgoals(task, trace_of({"-", "C", "C", "-", "P", "-"}));
  CHECK(never[0].satisfied_at_step == std::optional<int>(4));
  CHECK_FALSE(never[1].satisfied_at_step.has_value());
}

TEST_CASE("dependent sub-goal can be satisfied on the same step as its parent") {
  auto task = op_task({page_goal("parent", "Both"), page_goal("child", "Both", "parent")});
  auto flags = check_subgoals(task, trace_of({"Both"}));
  CHECK(flags[1].satisfied_at_step == std::optional<int>(0));
}

TEST_CASE("the initial screen does not count and finish steps are skipped") {
  auto task = op_task({page_goal("a", "A")});
  Trace t;
  auto s = step_showing(0, "A", json::object(), act::Finish{});
  t.steps.push_back(s);
  auto r = evaluate(task, t);
  CHECK_FALSE(r.completed);
  CHECK(r.changed_flags.empty());
  CHECK(r.steps_taken == 1);
}

TEST_CASE("state probes and min_count") {
  SubGoalSpec probe;
  probe.name = "wifi";
  probe.state_probe = StateProbe{"/settings/wifi", json(false), {}, {}, false};
  auto many = page_goal("two", "A");
  many.predicate->min_count = 2;
  auto task = op_task({probe, many});
  Trace t;
  t.steps.push_back(step_showing(0, "A", json{{"settings", {{"wifi", true}}}}));
  t.steps.push_back(step_showing(1, "A", json{{"settings", {{"wifi", false}}}}));
  auto flags = check_subgoals(task, t);
  CHECK(flags[0].satisfied_at_step == std::optional<int>(1));
  CHECK_FALSE(flags[1].satisfied_at_step.has_value());

  // A state probe never holds on an observation without state (real devices).
  Observation obs;
  CHECK_FALSE(subgoal_holds(probe, obs));
}

TEST_CASE("device_error traces are still evaluated") {
  auto task = op_task({page_goal("a", "A")});
  auto t = trace_of({"A"});
  t.termination = Termination::kDeviceError;
  t.error = "ExecutionFailed: tap";
  auto r = evaluate(task, t);
  CHECK(r.completed);
  CHECK(r.termination == Termination::kDeviceError);
  CHECK(r.error == "ExecutionFailed: tap");
}

TEST_CASE("normalization and quantities") {
  CHECK(normalize_answer("  Hello,   World! ") == "hello world");
  CHECK(normalize_answer("$16.50") == "16.50");
  CHECK(normalize_answer("50%") == "50%");
  auto q = extract_quantities("7.0km, 8 min");
  REQUIRE(q.size() == 2);
  CHECK(q == extract_quantities("8 minutes and 7 km"));
  CHECK(extract_quantities("1,234.50 dollars")[0] == Quantity{"1234.5", "usd"});
  CHECK(extract_quantities("007")[0].number == "7");
  CHECK(extract_quantities("0.50")[0].number == "0.5");
}

TEST_CASE("deterministic fallback") {
  CHECK(judge_fallback("42", "42") == std::optional<bool>(true));
  CHECK(judge_fallback("7.0km, 8 min", "7.0 km and 8 minutes") == std::optional<bool>(true));
  CHECK(judge_fallback("730", "It has 730 pages.") == std::optional<bool>(true));
  CHECK(judge_fallback("555-0199", "555-0199") == std::optional<bool>(true));
  CHECK_FALSE(judge_fallback("730", "412").has_value());
  // Numbers without units inside prose are left to the judge.
  CHECK_FALSE(judge_fallback("Android 14", "14").has_value());
}

TEST_CASE("judge_query") {
  CHECK_FALSE(judge_query("42", std::nullopt, nullptr));
  CHECK(judge_query("42", "42", nullptr));
  CHECK_FALSE(judge_query("Android 14", "Version fourteen", nullptr));

  ScriptedLlmClient yes({"CORRECT - same version"});
  CHECK(judge_query("Android 14", "Version fourteen", &yes, "Which Android version?"));
  REQUIRE(yes.calls() == 1);
  auto prompt = yes.requests()[0].messages[0].joined_text();
  CHECK(prompt.find("Reference answer: Android 14") != std::string::npos);
  CHECK(prompt.find("Assistant answer: Version fourteen") != std::string::npos);
  CHECK(prompt.find("Question: Which Android version?") != std::string::npos);

  ScriptedLlmClient no({"**INCORRECT**"});
  CHECK_FALSE(judge_query("Android 14", "13", &no));
  ScriptedLlmClient vague({"The answer seems correct"});
  CHECK_FALSE(judge_query("Android 14", "14 it is", &vague));

  // Exact matches never reach the judge.
  ScriptedLlmClient unused({"INCORRECT"});
  CHECK(judge_query("Blue", "blue.", &unused));
  CHECK(unused.calls() == 0);

  FunctionLlmClient down([](const ChatRequest&) -> std::string { throw TransientFailure("down"); });
  CHECK_THROWS_AS(judge_query("a b", "c d", &down, "", RetryPolicy{0, std::chrono::milliseconds(0)}), Error);
}

TEST_CASE("query task evaluation") {
  TaskSpec t;
  t.task_id = "q";
  t.app = "app";
  t.kind = TaskKind::kQuery;
  t.gold_answer = "5 minutes";
  t.human_steps = 5;
  Trace tr = trace_of({"a", "b", "c", "d", "e"});
  tr.steps.push_back(step_showing(5, "e", json::object(), act::Finish{"5 min"}));
  tr.finish_answer = "5 min";
  auto r = evaluate(t, tr);
  CHECK(r.completed);
  CHECK(r.answer_correct == std::optional<bool>(true));
  CHECK(r.steps_taken == 6);
  CHECK(r.changed_flags.size() == 5);
  CHECK(r.sub_goal_flags.empty());
}

TEST_CASE("result json round trip") {
  auto task = op_task({page_goal("a", "A"), page_goal("b", "B")});
  auto r = evaluate(task, trace_of({"A", "x"}));
  CHECK(EvalResult::from_json(r.to_json()) == r);
  CHECK(r.to_json()["sub_goal_flags"][1]["satisfied_at_step"].is_null());
}
