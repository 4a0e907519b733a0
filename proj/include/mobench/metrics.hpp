#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobench/evaluation.hpp"

namespace mobench {

// RRR is not reported below this success rate (percent).
inline constexpr double kRrrMinSuccessRate = 5.0;

struct AppCount {
  int completed = 0;
  int total = 0;
  bool operator==(const AppCount&) const = default;
};

struct MetricsReport {
  double sr = 0;
  std::optional<double> sub_sr;
  std::optional<double> rrr;
  std::optional<double> ror;
  int n_tasks = 0;
  int n_completed = 0;
  std::map<std::string, AppCount> per_app;

  bool operator==(const MetricsReport&) const = default;
};

// Rounds half away from zero to two decimals.
double round2(double v);

double success_rate(const std::vector<EvalResult>& results);
double sub_goal_rate(const std::vector<EvalResult>& results);
std::optional<double> reversed_redundancy(const std::vector<EvalResult>& results);
double reasonable_operation_ratio(const std::vector<EvalResult>& results);

MetricsReport aggregate(const std::vector<EvalResult>& results);

enum class ReportFormat { kTable, kJson, kCsv };
ReportFormat parse_report_format(std::string_view s);

nlohmann::json report_json(const MetricsReport& m);
std::string report(const std::vector<EvalResult>& results, ReportFormat format);
std::string render_report(const MetricsReport& m, ReportFormat format);

// Schema check for report_json documents; returns human-readable problems.
std::vector<std::string> validate_report_json(const nlohmann::json& j);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace mobench
