#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mobench/bench_runner.hpp"
#include "mobench/errors.hpp"
#include "mobench/task.hpp"
#include "support.hpp"

using namespace mobench;
using nlohmann::json;

namespace {

const auto kBroken = testsupport::fixtures() / "broken_suite";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Diagnostics of one file as "line: message-prefix" pairs.
std::vector<Diagnostic> diags_for(const std::string& name) {
  auto f = kBroken / "tasks" / name;
  return validate_task_json(f.string(), slurp(f));
}

bool has(const std::vector<Diagnostic>& ds, int line, const std::string& fragment) {
  return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) {
    return d.line == line && d.message.find(fragment) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("syntax errors carry a line") {
  auto ds = diags_for("a_syntax.json");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].line == 4);
  CHECK(ds[0].message.rfind("JSON syntax", 0) == 0);
}

TEST_CASE("schema problems are all reported with lines") {
  auto ds = diags_for("b_fields.json");
  CHECK(has(ds, 7, "unknown field 'colour'"));
  CHECK(has(ds, 9, "invalid regex"));
  CHECK(has(ds, 10, "JSON pointer"));
  CHECK(has(ds, 11, "ordered_after references unknown or later sub-goal 'later'"));
  CHECK(has(ds, 12, "checked must be a boolean"));
  CHECK(has(ds, 14, "'wiggle()' does not parse"));
  CHECK(has(ds, 6, "human_steps differs"));
  CHECK(ds.size() == 7);
  // Selector arguments are not parse errors.
  CHECK_FALSE(has(ds, 14, "tap(@toggle)"));
}

TEST_CASE("query tasks need a gold answer") {
  auto ds = diags_for("c_query.json");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].message.find("gold_answer") != std::string::npos);
}

TEST_CASE("suite validation adds cross-file checks") {
  auto ds = validate_suite(kBroken);
  auto file_has = [&](const std::string& file, int line, const std::string& fragment) {
    return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) {
      return d.file.find(file) != std::string::npos && d.line == line && d.message.find(fragment) != std::string::npos;
    });
  };
  CHECK(file_has("e_dup2.json", 2, "task_id 'dup' also used by"));
  CHECK(file_has("f_unknown_app.json", 3, "unknown app 'ghost_app'"));
  CHECK(file_has("g_fixture.json", 7, "no fixture 'night'"));
  CHECK(file_has("a_syntax.json", 4, "JSON syntax"));
  for (const auto& d : ds) CHECK(d.file.find("d_dup1.json") == std::string::npos);
  CHECK(format_diagnostic({"t.json", 3, "bad"}) == "t.json:3: bad");
  CHECK(format_diagnostic({"t.json", 0, "bad"}) == "t.json: bad");
}

TEST_CASE("the bundled suite is clean") {
  auto ds = validate_suite(testsupport::suite_dir());
  for (const auto& d : ds) MESSAGE(format_diagnostic(d));
  CHECK(ds.empty());
  auto tasks = load_tasks(testsupport::suite_dir() / "tasks");
  CHECK(tasks.size() == 17);
  CHECK(std::is_sorted(tasks.begin(), tasks.end(),
                       [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; }));
  for (const auto& t : tasks) {
    CHECK(t.human_steps == static_cast<int>(t.gold_actions.size()));
    if (t.kind == TaskKind::kQuery) CHECK(t.gold_answer.has_value());
    else CHECK_FALSE(t.sub_goals.empty());
  }
}

TEST_CASE("load_task rejects invalid files") {
  try {
    load_task(kBroken / "tasks" / "b_fields.json");
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("b_fields.json:") != std::string::npos);
  }
}

TEST_CASE("task json round trip") {
  auto t = load_task(kBroken / "tasks" / "d_dup1.json");
  CHECK(t.gold_actions == std::vector<std::string>{"tap(element=@toggle)", "finish()"});
  auto again = TaskSpec::from_json(t.to_json());
  CHECK(again.to_json() == t.to_json());
  auto e = load_task(kBroken / "tasks" / "e_dup2.json");
  REQUIRE(e.sub_goals.at(0).predicate);
  CHECK(e.sub_goals[0].predicate->checked == std::optional<bool>(true));
  CHECK(predicate_from_json(predicate_to_json(*e.sub_goals[0].predicate)).resource_id[0].op == StringOp::kEndsWith);
}

TEST_CASE("state probes") {
  json state = {{"app", {{"on", true}, {"name", "Pixel 8"}, {"items", {{{"t", "a"}, {"n", 1}}, {{"t", "b"}, {"n", 2}}}}}}};
  StateProbe p{"/app/on", json(true), {}, {}, false};
  CHECK(p.holds(state));
  p.negate = true;
  CHECK_FALSE(p.holds(state));
  CHECK(StateProbe{"/app/name", {}, "Pixel", {}, false}.holds(state));
  CHECK(StateProbe{"/app/items", {}, {}, json({{"t", "b"}, {"n", 2}}), false}.holds(state));
  CHECK_FALSE(StateProbe{"/app/items", {}, {}, json({{"t", "b"}, {"n", 1}}), false}.holds(state));
  CHECK(StateProbe{"/app/missing", {}, {}, {}, true}.holds(state));
  CHECK(StateProbe{"/app/name", {}, {}, {}, false}.holds(state));
}
