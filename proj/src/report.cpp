// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedsim/error.hpp"
#include "json.hpp"

namespace fedsim {
namespace {

std::string strategy_of(const std::string& run_id) {
  // run ids look like <name>-<strategy>-s<seed>
  const auto last = run_id.rfind('-');
  if (last == std::string::npos || last == 0) return "unknown";
  const auto prev = run_id.rfind('-', last - 1);
  const auto token = run_id.substr(prev == std::string::npos ? 0 : prev + 1,
                                   last - (prev == std::string::npos ? 0 : prev + 1));
  if (token == "fedavg" || token == "fedprox" || token == "fedasync") return token;
  return "unknown";
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v, int digits) {
  return v ? fixed(*v, digits) : "-";
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string padr(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

LogScan scan_log(std::istream& in, std::string_view source) {
  LogScan scan;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string_view line(text.data() + pos, (terminated ? nl : text.size()) - pos);
    pos = terminated ? nl + 1 : text.size();
    if (line.empty()) continue;
    try {
      scan.records.push_back(parse_record(line));
    } catch (const std::exception& e) {
      scan.complete = false;
      scan.problems.push_back(std::string(source) + ":" + std::to_string(line_no) +
                              ": unreadable record (" + e.what() + ")");
      break;
    }
    if (!terminated) {
      scan.complete = false;
      scan.problems.push_back(std::string(source) + ":" + std::to_string(line_no) +
                              ": last line has no newline (truncated write)");
    }
  }
  std::map<std::string, bool> ended;
  for (const auto& r : scan.records) ended[r.run_id] = r.event == EventKind::kRunEnd;
  for (const auto& [run, done] : ended) {
    if (!done) {
      scan.complete = false;
      scan.problems.push_back(std::string(source) + ": run " + run + " has no run_end record");
    }
  }
  if (scan.records.empty()) {
    scan.complete = false;
    scan.problems.push_back(std::string(source) + ": no records");
  }
  return scan;
}

LogScan scan_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open log " + path);
  return scan_log(in, path);
}

RunReport build_report(const LogScan& scan) {
  RunReport rep;
  rep.complete = scan.complete;
  rep.problems = scan.problems;

  std::map<std::string, std::vector<const MetricsRecord*>> by_run;
  for (const auto& r : scan.records) by_run[r.run_id].push_back(&r);

  for (const auto& [run_id, recs] : by_run) {
    RunSummary s;
    s.run_id = run_id;
    s.strategy = strategy_of(run_id);
    s.records = recs.size();
    std::map<std::size_t, RoundRow> rounds;
    std::map<std::string, ClientTotals> clients;
    std::map<std::string, std::set<std::size_t>> participated;
    auto client = [&](const MetricsRecord& r) -> ClientTotals& {
      auto& c = clients[*r.client_id];
      c.client_id = *r.client_id;
      return c;
    };
    for (const auto* rp : recs) {
      const auto& r = *rp;
      s.total_energy_j += r.energy_j;
      s.makespan_s = std::max(s.makespan_s, r.t_end_s);
      if (r.event == EventKind::kRunEnd) {
        s.complete = true;
        continue;
      }
      auto& row = rounds[r.round];
      row.round = r.round;
      row.t_end_s = std::max(row.t_end_s, r.t_end_s);
      switch (r.event) {
        case EventKind::kTrainWindow:
          ++row.participants;
          if (r.client_id) {
            auto& c = client(r);
            c.time_s += r.duration_s();
            c.energy_j += r.energy_j;
            ++c.trainings;
            participated[*r.client_id].insert(r.round);
          }
          break;
        case EventKind::kAggregate:
          s.server_energy_j += r.energy_j;
          if (r.client_id) ++client(r).applications;
          break;
        case EventKind::kEval:
          if (row.accuracy) {
            rep.problems.push_back("run " + run_id + ": round " + std::to_string(r.round) +
                                   " has more than one eval record");
          }
          row.accuracy = r.accuracy;
          row.loss = r.loss;
          break;
        case EventKind::kDropout:
          ++row.dropouts;
          if (r.client_id) ++client(r).dropout_count;
          break;
        case EventKind::kOom:
          ++row.ooms;
          if (r.client_id) ++client(r).oom_count;
          break;
        case EventKind::kStalled:
          row.stalled = true;
          break;
        case EventKind::kRunEnd:
          break;
      }
    }
    for (auto& [id, c] : clients) {
      c.rounds_participated = participated[id].size();
      s.clients.push_back(c);
    }
    for (auto& [_, row] : rounds) {
      if (row.accuracy) s.final_accuracy = row.accuracy;
      s.rounds.push_back(row);
    }
    rep.runs.push_back(std::move(s));
  }

  for (const auto& s : rep.runs) {
    rep.comparison.push_back({0, s.run_id, s.strategy, s.final_accuracy, s.makespan_s, s.total_energy_j});
  }
  std::stable_sort(rep.comparison.begin(), rep.comparison.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     if (a.final_accuracy.has_value() != b.final_accuracy.has_value()) {
                       return a.final_accuracy.has_value();
                     }
                     if (a.final_accuracy && *a.final_accuracy != *b.final_accuracy) {
                       return *a.final_accuracy > *b.final_accuracy;
                     }
                     return a.run_id < b.run_id;
                   });
  for (std::size_t i = 0; i < rep.comparison.size(); ++i) rep.comparison[i].rank = i + 1;
  return rep;
}

RunReport report_from_files(const std::vector<std::string>& paths) {
  LogScan all;
  for (const auto& p : paths) {
    auto scan = scan_log_file(p);
    all.complete = all.complete && scan.complete;
    all.records.insert(all.records.end(), scan.records.begin(), scan.records.end());
    all.problems.insert(all.problems.end(), scan.problems.begin(), scan.problems.end());
  }
  return build_report(all);
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw ConfigError("report format must be table, csv or json");
}

namespace {

std::string render_table(const RunReport& rep) {
  std::ostringstream out;
  for (const auto& s : rep.runs) {
    out << "run " << s.run_id << "  strategy " << s.strategy << "  records " << s.records
        << (s.complete ? "" : "  [incomplete]") << "\n\n";
    out << pad("round", 6) << pad("accuracy", 10) << pad("loss", 10) << pad("t_end_s", 14)
        << pad("trained", 9) << pad("dropout", 9) << pad("oom", 5) << "\n";
    for (const auto& r : s.rounds) {
      out << pad(std::to_string(r.round), 6) << pad(opt_fixed(r.accuracy, 4), 10)
          << pad(opt_fixed(r.loss, 4), 10) << pad(fixed(r.t_end_s, 2), 14)
          << pad(std::to_string(r.participants), 9) << pad(std::to_string(r.dropouts), 9)
          << pad(std::to_string(r.ooms), 5) << (r.stalled ? "  stalled" : "") << "\n";
    }
    out << "\nfinal accuracy " << opt_fixed(s.final_accuracy, 4) << "\n\n";
    out << padr("client", 10) << pad("rounds", 8) << pad("time_s", 14) << pad("energy_j", 16)
        << pad("applied", 9) << pad("oom", 5) << pad("dropout", 9) << "\n";
    for (const auto& c : s.clients) {
      out << padr(c.client_id, 10) << pad(std::to_string(c.rounds_participated), 8)
          << pad(fixed(c.time_s, 2), 14) << pad(fixed(c.energy_j, 1), 16)
          << pad(std::to_string(c.applications), 9) << pad(std::to_string(c.oom_count), 5)
          << pad(std::to_string(c.dropout_count), 9) << "\n";
    }
    out << "\nserver idle energy_j " << fixed(s.server_energy_j, 1) << "\n";
    out << "total energy_j " << fixed(s.total_energy_j, 1) << "  makespan_s "
        << fixed(s.makespan_s, 2) << "\n\n";
  }
  out << "comparison (by final accuracy)\n";
  out << pad("rank", 5) << "  " << padr("run_id", 36) << padr("strategy", 10) << pad("accuracy", 10)
      << pad("makespan_s", 14) << pad("energy_j", 16) << "\n";
  for (const auto& c : rep.comparison) {
    out << pad(std::to_string(c.rank), 5) << "  " << padr(c.run_id, 36) << padr(c.strategy, 10)
        << pad(opt_fixed(c.final_accuracy, 4), 10) << pad(fixed(c.makespan_s, 2), 14)
        << pad(fixed(c.total_energy_j, 1), 16) << "\n";
  }
  if (!rep.complete) {
    out << "\nINCOMPLETE LOG\n";
    for (const auto& p : rep.problems) out << "  " << p << "\n";
  }
  return out.str();
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string render_csv(const RunReport& rep) {
  std::ostringstream out;
  out << "section,run_id,strategy,round,client_id,accuracy,loss,t_end_s,time_s,energy_j,"
         "trained,rounds,applications,oom,dropout,rank\n";
  for (const auto& s : rep.runs) {
    for (const auto& r : s.rounds) {
      out << "round," << s.run_id << "," << s.strategy << "," << r.round << ",,"
          << opt_num(r.accuracy) << "," << opt_num(r.loss) << "," << num(r.t_end_s) << ",,,"
          << r.participants << ",,," << r.ooms << "," << r.dropouts << ",\n";
    }
    for (const auto& c : s.clients) {
      out << "client," << s.run_id << "," << s.strategy << ",," << c.client_id << ",,,,"
          << num(c.time_s) << "," << num(c.energy_j) << "," << c.trainings << ","
          << c.rounds_participated << "," << c.applications << "," << c.oom_count << ","
          << c.dropout_count << ",\n";
    }
    out << "run," << s.run_id << "," << s.strategy << ",,," << opt_num(s.final_accuracy) << ",,"
        << num(s.makespan_s) << ",," << num(s.total_energy_j) << ",,,,,,\n";
  }
  for (const auto& c : rep.comparison) {
    out << "comparison," << c.run_id << "," << c.strategy << ",,," << opt_num(c.final_accuracy)
        << ",," << num(c.makespan_s) << ",," << num(c.total_energy_j) << ",,,,,," << c.rank << "\n";
  }
  out << "status,,,,,,,,,,,,,,," << (rep.complete ? "complete" : "incomplete") << "\n";
  return out.str();
}

std::string render_json(const RunReport& rep) {
  using J = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? J(*v) : J(nullptr); };
  J j;
  j["complete"] = rep.complete;
  j["problems"] = rep.problems;
  J runs = J::array();
  for (const auto& s : rep.runs) {
    J r;
    r["run_id"] = s.run_id;
    r["strategy"] = s.strategy;
    r["complete"] = s.complete;
    r["records"] = s.records;
    r["final_accuracy"] = opt(s.final_accuracy);
    J rounds = J::array();
    for (const auto& row : s.rounds) {
      rounds.push_back({{"round", row.round},
                        {"accuracy", opt(row.accuracy)},
                        {"loss", opt(row.loss)},
                        {"t_end_s", row.t_end_s},
                        {"trained", row.participants},
                        {"dropout", row.dropouts},
                        {"oom", row.ooms},
                        {"stalled", row.stalled}});
    }
    r["rounds"] = rounds;
    J clients = J::array();
    for (const auto& c : s.clients) {
      clients.push_back({{"client_id", c.client_id},
                         {"time_s", c.time_s},
                         {"energy_j", c.energy_j},
                         {"rounds_participated", c.rounds_participated},
                         {"trainings", c.trainings},
                         {"applications", c.applications},
                         {"oom_count", c.oom_count},
                         {"dropout_count", c.dropout_count}});
    }
    r["clients"] = clients;
    r["server_energy_j"] = s.server_energy_j;
    r["total_energy_j"] = s.total_energy_j;
    r["makespan_s"] = s.makespan_s;
    runs.push_back(r);
  }
  j["runs"] = runs;
  J cmp = J::array();
  for (const auto& c : rep.comparison) {
    cmp.push_back({{"rank", c.rank},
                   {"run_id", c.run_id},
                   {"strategy", c.strategy},
                   {"final_accuracy", opt(c.final_accuracy)},
                   {"makespan_s", c.makespan_s},
                   {"total_energy_j", c.total_energy_j}});
  }
  j["comparison"] = cmp;
  return j.dump(2) + "\n";
}

}  // namespace

std::string render(const RunReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kTable:
      return render_table(report);
    case ReportFormat::kCsv:
      return render_csv(report);
    case ReportFormat::kJson:
      return render_json(report);
  }
  return {};
}

}  // namespace fedsim
