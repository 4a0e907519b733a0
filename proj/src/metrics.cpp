#include "mobench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mobench/errors.hpp"

namespace mobench {

using nlohmann::json;

double round2(double v) { return std::round(v * 100.0) / 100.0; }

namespace {

int completed_count(const std::vector<EvalResult>& results) {
  return static_cast<int>(std::count_if(results.begin(), results.end(), [](const EvalResult& r) { return r.completed; }));
}

double raw_success_rate(const std::vector<EvalResult>& results) {
  return 100.0 * completed_count(results) / static_cast<double>(results.size());
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fmt2(*v) : "-"; }

}  // namespace

double success_rate(const std::vector<EvalResult>& results) {
  if (results.empty()) throw Error(ErrorKind::kEmptyResults, "no results");
  return round2(raw_success_rate(results));
}

double sub_goal_rate(const std::vector<EvalResult>& results) {
  long total = 0, satisfied = 0;
  bool any = false;
  for (const auto& r : results) {
    if (r.kind != TaskKind::kOperation) continue;
    any = true;
    total += static_cast<long>(r.sub_goal_flags.size());
    satisfied += r.satisfied_count();
  }
  if (!any || total == 0) throw Error(ErrorKind::kNoOperationTasks, "no operation tasks with sub-goals");
  return round2(100.0 * static_cast<double>(satisfied) / static_cast<double>(total));
}

std::optional<double> reversed_redundancy(const std::vector<EvalResult>& results) {
  // Compared at reporting precision so a table never shows SR 5.00 next to a suppressed RRR.
  if (results.empty() || round2(raw_success_rate(results)) < kRrrMinSuccessRate) return std::nullopt;
  double sum = 0;
  int n = 0;
  for (const auto& r : results) {
    if (!r.completed || r.steps_taken <= 0) continue;
    sum += 100.0 * r.human_steps / r.steps_taken;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return round2(sum / n);
}

double reasonable_operation_ratio(const std::vector<EvalResult>& results) {
  long ops = 0, changed = 0;
  for (const auto& r : results) {
    ops += static_cast<long>(r.changed_flags.size());
    changed += std::count(r.changed_flags.begin(), r.changed_flags.end(), true);
  }
  if (ops == 0) throw Error(ErrorKind::kNoOperations, "no performed operations");
  return round2(100.0 * static_cast<double>(changed) / static_cast<double>(ops));
}

MetricsReport aggregate(const std::vector<EvalResult>& results) {
  MetricsReport m;
  m.sr = success_rate(results);
  m.n_tasks = static_cast<int>(results.size());
  m.n_completed = completed_count(results);
  try {
    m.sub_sr = sub_goal_rate(results);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoOperationTasks) throw;
  }
  m.rrr = reversed_redundancy(results);
  try {
    m.ror = reasonable_operation_ratio(results);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoOperations) throw;
  }
  for (const auto& r : results) {
    auto& c = m.per_app[r.app];
    ++c.total;
    c.completed += r.completed ? 1 : 0;
  }
  return m;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "table") return ReportFormat::kTable;
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  throw Error(ErrorKind::kConfig, "unknown report format '" + std::string(s) + "'");
}

json report_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  json apps = json::object();
  for (const auto& [app, c] : m.per_app) apps[app] = {{"completed", c.completed}, {"total", c.total}};
  return {{"sr", m.sr},
          {"sub_sr", opt(m.sub_sr)},
          {"rrr", opt(m.rrr)},
          {"ror", opt(m.ror)},
          {"n_tasks", m.n_tasks},
          {"n_completed", m.n_completed},
          {"per_app", apps},
          {"conventions",
           {{"sub_sr", "micro"}, {"rrr", "per_task_mean"}, {"ror", "pooled"}, {"rrr_min_sr", kRrrMinSuccessRate}}}};
}

std::string render_report(const MetricsReport& m, ReportFormat format) {
  if (format == ReportFormat::kJson) return report_json(m).dump(2) + "\n";
  std::ostringstream os;
  if (format == ReportFormat::kCsv) {
    os << "metric,value\n";
    os << "sr," << fmt2(m.sr) << "\n";
    os << "sub_sr," << cell(m.sub_sr) << "\n";
    os << "rrr," << cell(m.rrr) << "\n";
    os << "ror," << cell(m.ror) << "\n";
    os << "n_completed," << m.n_completed << "\n";
    os << "n_tasks," << m.n_tasks << "\n";
    os << "\napp,completed,total\n";
    for (const auto& [app, c] : m.per_app) os << app << "," << c.completed << "," << c.total << "\n";
    return os.str();
  }
  std::size_t w = 5;
  for (const auto& [app, c] : m.per_app) w = std::max(w, app.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %10s\n", "SR", "Sub-SR", "RRR", "ROR", "Completed");
  os << line;
  const std::string done = std::to_string(m.n_completed) + "/" + std::to_string(m.n_tasks);
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %10s\n", fmt2(m.sr).c_str(), cell(m.sub_sr).c_str(),
                cell(m.rrr).c_str(), cell(m.ror).c_str(), done.c_str());
  os << line << "\n";
  std::snprintf(line, sizeof line, "%-*s %9s %6s\n", static_cast<int>(w), "App", "Completed", "Total");
  os << line;
  for (const auto& [app, c] : m.per_app) {
    std::snprintf(line, sizeof line, "%-*s %9d %6d\n", static_cast<int>(w), app.c_str(), c.completed, c.total);
    os << line;
  }
  return os.str();
}

std::string report(const std::vector<EvalResult>& results, ReportFormat format) {
  return render_report(aggregate(results), format);
}

std::vector<std::string> validate_report_json(const json& j) {
  std::vector<std::string> out;
  if (!j.is_object()) return {"report must be an object"};
  auto percent = [&](const char* key, bool nullable) {
    if (!j.contains(key)) {
      out.push_back(std::string("missing '") + key + "'");
      return;
    }
    const auto& v = j[key];
    if (v.is_null()) {
      if (!nullable) out.push_back(std::string("'") + key + "' may not be null");
      return;
    }
    if (!v.is_number()) out.push_back(std::string("'") + key + "' must be a number");
    else if (v.get<double>() < 0 || (std::string(key) != "rrr" && v.get<double>() > 100))
      out.push_back(std::string("'") + key + "' out of range");
  };
  percent("sr", false);
  percent("sub_sr", true);
  percent("rrr", true);
  percent("ror", true);
  for (const char* key : {"n_tasks", "n_completed"})
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<int>() < 0)
      out.push_back(std::string("'") + key + "' must be a nonnegative integer");
  if (!out.empty()) return out;
  const int n = j["n_tasks"].get<int>(), done = j["n_completed"].get<int>();
  if (done > n) out.push_back("n_completed exceeds n_tasks");
  if (n > 0 && std::abs(j["sr"].get<double>() - round2(100.0 * done / n)) > 1e-9) out.push_back("sr disagrees with counts");
  if (!j.contains("per_app") || !j["per_app"].is_object()) {
    out.push_back("'per_app' must be an object");
    return out;
  }
  int sum_done = 0, sum_total = 0;
  for (auto it = j["per_app"].begin(); it != j["per_app"].end(); ++it) {
    const auto& c = it.value();
    if (!c.is_object() || !c.contains("completed") || !c.contains("total") || !c["completed"].is_number_integer() ||
        !c["total"].is_number_integer()) {
      out.push_back("per_app." + it.key() + " needs integer completed/total");
      continue;
    }
    if (c["completed"].get<int>() > c["total"].get<int>()) out.push_back("per_app." + it.key() + ": completed > total");
    sum_done += c["completed"].get<int>();
    sum_total += c["total"].get<int>();
  }
  if (sum_done != done) out.push_back("per_app completed counts do not sum to n_completed");
  if (sum_total != n) out.push_back("per_app totals do not sum to n_tasks");
  if (!j["rrr"].is_null() && n > 0 && round2(100.0 * done / n) < kRrrMinSuccessRate)
    out.push_back("rrr reported although sr is below the reporting threshold");
  return out;
}

MetricsReport report_from_json(const json& j) {
  auto problems = validate_report_json(j);
  if (!problems.empty()) throw Error(ErrorKind::kConfig, "invalid report: " + problems.front());
  auto opt = [&](const char* key) { return j[key].is_null() ? std::nullopt : std::optional<double>(j[key].get<double>()); };
  MetricsReport m;
  m.sr = j["sr"].get<double>();
  m.sub_sr = opt("sub_sr");
  m.rrr = opt("rrr");
  m.ror = opt("ror");
  m.n_tasks = j["n_tasks"].get<int>();
  m.n_completed = j["n_completed"].get<int>();
  for (auto it = j["per_app"].begin(); it != j["per_app"].end(); ++it)
    m.per_app[it.key()] = {it.value()["completed"].get<int>(), it.value()["total"].get<int>()};
  return m;
}

}  // namespace mobench
