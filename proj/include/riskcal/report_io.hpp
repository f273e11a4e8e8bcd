#pragma once

// Report persistence. A report lands as two files sharing a stem:
//   <stem>.rows.csv      one row per (trajectory, iteration) audit record
//   <stem>.summary.json  config echo, solve plan, aggregate counts
// Doubles are written with %.17g so a load reproduces every value bit for bit;
// the summary uses insertion-ordered keys so reruns diff cleanly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskcal/config_json.hpp"
#include "riskcal/harness.hpp"

namespace riskcal {

namespace detail {

inline std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_double_field(const std::string& field, const std::string& file, int line_no) {
  try {
    std::size_t used = 0;
    const double value = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error(file + ":" + std::to_string(line_no) + ": malformed number \"" +
                             field + "\"");
  }
}

inline int parse_int_field(const std::string& field, const std::string& file, int line_no) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(field, &used);
    if (used != field.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error(file + ":" + std::to_string(line_no) + ": malformed integer \"" +
                             field + "\"");
  }
}

}  // namespace detail

inline const char kRowsCsvHeader[] = "trajectory,iteration,lambda_hat,risk_self,risk_next,stop_reason";

inline void emit_report(const ExperimentReport& report, const std::string& stem) {
  {
    std::ofstream csv(stem + ".rows.csv");
    if (!csv) throw std::runtime_error("emit_report: cannot open " + stem + ".rows.csv");
    csv << kRowsCsvHeader << "\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const auto& row = report.rows[i];
      for (std::size_t t = 0; t < row.lambda_hat.size(); ++t) {
        csv << i << ',' << t << ',' << detail::g17(row.lambda_hat[t]) << ','
            << detail::g17(row.risk_self[t]) << ',' << detail::g17(row.risk_next[t]) << ','
            << to_string(row.stop_reason) << "\n";
      }
    }
    if (!csv) throw std::runtime_error("emit_report: write failed for " + stem + ".rows.csv");
  }
  ordered_json summary;
  summary["config"] = config_to_json(report.config);
  summary["plan"] = report.plan ? plan_to_json(*report.plan) : ordered_json(nullptr);
  summary["aggregates"] = aggregates_to_json(report.aggregates);
  std::ofstream js(stem + ".summary.json");
  if (!js) throw std::runtime_error("emit_report: cannot open " + stem + ".summary.json");
  js << summary.dump(2) << "\n";
  if (!js) throw std::runtime_error("emit_report: write failed for " + stem + ".summary.json");
}

inline ExperimentReport load_report(const std::string& stem) {
  ExperimentReport report;
  {
    const std::string path = stem + ".summary.json";
    std::ifstream js(path);
    if (!js) throw std::runtime_error("load_report: cannot open " + path);
    nlohmann::json summary;
    try {
      summary = nlohmann::json::parse(js);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("load_report: " + path + ": " + e.what());
    }
    detail::check_keys(summary, "summary", {"config", "plan", "aggregates"});
    report.config = config_from_json(summary.at("config"));
    if (!summary.at("plan").is_null()) report.plan = plan_from_json(summary.at("plan"));
    report.aggregates = aggregates_from_json(summary.at("aggregates"));
  }

  const std::string path = stem + ".rows.csv";
  std::ifstream csv(path);
  if (!csv) throw std::runtime_error("load_report: cannot open " + path);
  std::string line;
  if (!std::getline(csv, line) || line != kRowsCsvHeader)
    throw std::runtime_error("load_report: " + path + ": expected header \"" + kRowsCsvHeader +
                             "\"");
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 6 fields, got " +
                               std::to_string(fields.size()));
    const int traj = detail::parse_int_field(fields[0], path, line_no);
    const int iter = detail::parse_int_field(fields[1], path, line_no);
    if (traj < 0 || traj > static_cast<int>(report.rows.size()))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": trajectory index out of order");
    if (traj == static_cast<int>(report.rows.size())) report.rows.emplace_back();
    auto& row = report.rows[static_cast<std::size_t>(traj)];
    if (iter != static_cast<int>(row.lambda_hat.size()))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": iteration index out of order");
    row.lambda_hat.push_back(detail::parse_double_field(fields[2], path, line_no));
    row.risk_self.push_back(detail::parse_double_field(fields[3], path, line_no));
    row.risk_next.push_back(detail::parse_double_field(fields[4], path, line_no));
    row.stop_reason = stop_reason_from_string(fields[5]);
  }
  return report;
}

}  // namespace riskcal
