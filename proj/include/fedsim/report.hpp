// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run reports computed from metrics logs alone. Rendering is a pure function
// of the log contents.

#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/metrics.hpp"

namespace fedsim {

struct LogScan {
  std::vector<MetricsRecord> records;
  bool complete = true;
  std::vector<std::string> problems;
};

/// Reads records until the first unreadable line. A log is complete when
/// every line parses, the last line ends with a newline and every run ends
/// with a run_end record.
LogScan scan_log(std::istream& in, std::string_view source = "log");
LogScan scan_log_file(const std::string& path);

struct RoundRow {
  std::size_t round = 0;
  std::optional<double> accuracy;
  std::optional<double> loss;
  double t_end_s = 0.0;
  std::size_t participants = 0;  // train_window records
  std::size_t dropouts = 0;
  std::size_t ooms = 0;
  bool stalled = false;
};

struct ClientTotals {
  std::string client_id;
  double time_s = 0.0;
  double energy_j = 0.0;
  std::size_t rounds_participated = 0;
  std::size_t trainings = 0;
  std::size_t applications = 0;  // async server applications
  std::size_t oom_count = 0;
  std::size_t dropout_count = 0;
};

struct RunSummary {
  std::string run_id;
  std::string strategy;  // parsed from run_id
  std::vector<RoundRow> rounds;
  std::optional<double> final_accuracy;
  std::vector<ClientTotals> clients;  // sorted by id
  double server_energy_j = 0.0;
  double total_energy_j = 0.0;
  double makespan_s = 0.0;
  std::size_t records = 0;
  bool complete = false;
};

struct ComparisonRow {
  std::size_t rank = 0;
  std::string run_id;
  std::string strategy;
  std::optional<double> final_accuracy;
  double makespan_s = 0.0;
  double total_energy_j = 0.0;
};

struct RunReport {
  std::vector<RunSummary> runs;  // sorted by run_id
  /// Highest final accuracy first; runs without one last; ties by run_id.
  std::vector<ComparisonRow> comparison;
  bool complete = true;
  std::vector<std::string> problems;
};

RunReport build_report(const LogScan& scan);
/// Concatenates the scans of several logs, then builds one report.
RunReport report_from_files(const std::vector<std::string>& paths);

enum class ReportFormat { kTable, kCsv, kJson };
ReportFormat parse_report_format(std::string_view name);
std::string render(const RunReport& report, ReportFormat format);

}  // namespace fedsim
