#include <doctest.h>

#include "mobench/errors.hpp"
#include "mobench/metrics.hpp"

using namespace mobench;
using nlohmann::json;

namespace {

EvalResult op(std::string app, bool done, int goals, int satisfied, int human = 4, int steps = 8,
              std::vector<bool> changed = {}) {
  EvalResult r;
  r.task_id = app + "_" + std::to_string(goals) + std::to_string(satisfied) + (done ? "d" : "u");
  r.app = std::move(app);
  r.kind = TaskKind::kOperation;
  r.completed = done;
  for (int i = 0; i < goals; ++i) r.sub_goal_flags.push_back({"g" + std::to_string(i), i < satisfied ? std::optional<int>(i) : std::nullopt});
  r.human_steps = human;
  r.steps_taken = steps;
  r.changed_flags = std::move(changed);
  return r;
}

EvalResult query(std::string app, bool done, int human = 3, int steps = 3) {
  EvalResult r;
  r.task_id = app + "_q";
  r.app = std::move(app);
  r.kind = TaskKind::kQuery;
  r.completed = done;
  r.answer_correct = done;
  r.human_steps = human;
  r.steps_taken = steps;
  return r;
}

std::vector<EvalResult> counts(int completed, int total) {
  std::vector<EvalResult> out;
  for (int i = 0; i < total; ++i) out.push_back(query("app", i < completed));
  return out;
}

}  // namespace

TEST_CASE("success rate") {
  CHECK(success_rate(counts(43, 138)) == doctest::Approx(31.16));
  CHECK(success_rate(counts(35, 138)) == doctest::Approx(25.36));
  CHECK(success_rate(counts(0, 10)) == 0.0);
  CHECK_THROWS_AS(success_rate({}), Error);
}

TEST_CASE("sub-goal rate is micro averaged over operation tasks") {
  CHECK(sub_goal_rate({op("a", true, 3, 3), op("a", false, 2, 0)}) == doctest::Approx(60.0));
  CHECK(sub_goal_rate({op("a", true, 3, 3), query("a", false)}) == doctest::Approx(100.0));
  // 4 tasks, 11 sub-goals, 7 satisfied.
  CHECK(sub_goal_rate({op("a", true, 2, 2), op("a", false, 4, 3), op("b", false, 3, 1), op("b", true, 2, 1)}) ==
        doctest::Approx(63.64));
  try {
    sub_goal_rate({query("a", true)});
    FAIL("expected NoOperationTasks");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoOperationTasks);
  }
}

TEST_CASE("reversed redundancy") {
  CHECK(reversed_redundancy({op("a", true, 1, 1, 4, 8)}) == std::optional<double>(50.0));
  CHECK(reversed_redundancy({op("a", true, 1, 1, 6, 5)}) == std::optional<double>(120.0));
  // Per-task mean, not ratio of sums: (50 + 100) / 2.
  CHECK(reversed_redundancy({op("a", true, 1, 1, 4, 8), op("a", true, 1, 1, 3, 3)}) == std::optional<double>(75.0));
  // Uncompleted tasks do not enter the mean.
  CHECK(reversed_redundancy({op("a", true, 1, 1, 4, 8), op("a", false, 1, 0, 1, 25)}) == std::optional<double>(50.0));
  // 3 of 138 is SR 2.17: suppressed.
  CHECK_FALSE(reversed_redundancy(counts(3, 138)).has_value());
  CHECK_FALSE(reversed_redundancy(counts(0, 5)).has_value());
  // Exactly 5 percent is reported.
  CHECK(reversed_redundancy(counts(1, 20)).has_value());
}

TEST_CASE("reasonable operation ratio is pooled") {
  std::vector<bool> seventeen(20, true);
  for (int i = 0; i < 3; ++i) seventeen[i] = false;
  CHECK(reasonable_operation_ratio({op("a", true, 1, 1, 1, 20, seventeen)}) == doctest::Approx(85.0));
  auto r1 = op("a", true, 1, 1, 1, 5, {true, true, true, true, false});
  auto r2 = op("a", true, 1, 1, 1, 3, {true, true, true});
  auto r3 = op("a", true, 1, 1, 1, 2, {false, false});
  CHECK(reasonable_operation_ratio({r1, r2, r3}) == doctest::Approx(70.0));
  CHECK(reasonable_operation_ratio({r3, r1, r2}) == doctest::Approx(70.0));
  CHECK_THROWS_AS(reasonable_operation_ratio({query("a", true)}), Error);
}

TEST_CASE("aggregate and per-app counts") {
  std::vector<EvalResult> rs = {op("clock", true, 2, 2, 4, 4, {true, true, true}), op("clock", false, 2, 1),
                                query("contacts", true)};
  auto m = aggregate(rs);
  CHECK(m.n_tasks == 3);
  CHECK(m.n_completed == 2);
  CHECK(m.sr == doctest::Approx(66.67));
  CHECK(m.per_app["clock"] == AppCount{1, 2});
  CHECK(m.per_app["contacts"] == AppCount{1, 1});
  CHECK(m.sub_sr == std::optional<double>(75.0));
  CHECK(m.ror == std::optional<double>(100.0));

  auto only_queries = aggregate({query("a", false, 3, 0)});
  CHECK_FALSE(only_queries.sub_sr.has_value());
  CHECK_FALSE(only_queries.ror.has_value());
}

TEST_CASE("report formats") {
  std::vector<EvalResult> rs = {op("clock", true, 2, 2, 4, 8, {true, false}), query("contacts", false, 3, 2)};
  auto csv = report(rs, ReportFormat::kCsv);
  CHECK(csv.find("sr,50.00\n") != std::string::npos);
  CHECK(csv.find("rrr,50.00\n") != std::string::npos);
  CHECK(csv.find("ror,50.00\n") != std::string::npos);
  CHECK(csv.find("clock,1,1\n") != std::string::npos);

  auto table = report(rs, ReportFormat::kTable);
  CHECK(table.find("Sub-SR") != std::string::npos);
  CHECK(table.find("1/2") != std::string::npos);

  auto none = report({query("a", false)}, ReportFormat::kTable);
  CHECK(none.find(" - ") != std::string::npos);

  auto j = json::parse(report(rs, ReportFormat::kJson));
  CHECK(validate_report_json(j).empty());
  CHECK(report_from_json(j) == aggregate(rs));
  CHECK(j["conventions"]["sub_sr"] == "micro");
}

TEST_CASE("report schema validator catches inconsistencies") {
  auto j = report_json(aggregate({query("a", true), query("b", false)}));
  auto bad = j;
  bad["sr"] = 10.0;
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad["per_app"]["a"]["completed"] = 0;
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad.erase("n_tasks");
  CHECK_FALSE(validate_report_json(bad).empty());
  auto low = report_json(aggregate(counts(3, 138)));
  CHECK(validate_report_json(low).empty());
  low["rrr"] = 90.0;
  CHECK_FALSE(validate_report_json(low).empty());
  CHECK_THROWS_AS(report_from_json(low), Error);
}

TEST_CASE("round2 and formats") {
  CHECK(round2(31.159420) == doctest::Approx(31.16));
  CHECK(round2(0.125) == doctest::Approx(0.13));
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK_THROWS_AS(parse_report_format("xml"), Error);
}
