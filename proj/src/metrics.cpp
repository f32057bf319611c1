// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedsim/error.hpp"
#include "json.hpp"

namespace fedsim {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kEventNames[] = {"train_window", "aggregate", "eval",   "dropout",
                                            "oom",          "stalled",   "run_end"};

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string_view to_string(EventKind kind) { return kEventNames[static_cast<int>(kind)]; }

EventKind parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kEventNames); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  throw std::invalid_argument("unknown event kind \"" + std::string(name) + "\"");
}

void MetricsRecord::validate() const {
  if (!(t_end_s >= t_start_s)) {
    throw std::invalid_argument("metrics record: t_end_s precedes t_start_s");
  }
  const double expected = power_w * (t_end_s - t_start_s);
  const double tol = 1e-6 * std::max(std::abs(expected), std::abs(energy_j));
  if (std::abs(energy_j - expected) > tol) {
    throw std::invalid_argument("metrics record: energy_j is not power_w x duration");
  }
}

std::string to_jsonl(const MetricsRecord& r) {
  ordered_json j;
  j["run_id"] = r.run_id;
  j["round"] = r.round;
  j["event"] = std::string(to_string(r.event));
  j["client_id"] = opt(r.client_id);
  j["t_start_s"] = r.t_start_s;
  j["t_end_s"] = r.t_end_s;
  j["mem_mib"] = r.mem_mib;
  j["power_w"] = r.power_w;
  j["util_pct"] = r.util_pct;
  j["energy_j"] = r.energy_j;
  j["n_samples"] = r.n_samples;
  j["loss"] = opt(r.loss);
  j["accuracy"] = opt(r.accuracy);
  j["staleness"] = opt(r.staleness);
  j["estimated"] = r.estimated;
  return j.dump();
}

MetricsRecord parse_record(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed log line: ") + e.what());
  }
  try {
    MetricsRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.round = j.at("round").get<std::size_t>();
    r.event = parse_event_kind(j.at("event").get<std::string>());
    if (!j.at("client_id").is_null()) r.client_id = j["client_id"].get<std::string>();
    r.t_start_s = j.at("t_start_s").get<double>();
    r.t_end_s = j.at("t_end_s").get<double>();
    r.mem_mib = j.at("mem_mib").get<double>();
    r.power_w = j.at("power_w").get<double>();
    r.util_pct = j.at("util_pct").get<double>();
    r.energy_j = j.at("energy_j").get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    if (!j.at("loss").is_null()) r.loss = j["loss"].get<double>();
    if (!j.at("accuracy").is_null()) r.accuracy = j["accuracy"].get<double>();
    if (!j.at("staleness").is_null()) r.staleness = j["staleness"].get<std::uint64_t>();
    r.estimated = j.at("estimated").get<bool>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw std::invalid_argument(std::string("malformed log record: ") + e.what());
  }
}

void MetricsSink::emit(const MetricsRecord& record) {
  try {
    record.validate();
  } catch (const std::invalid_argument& e) {
    throw SimulationError(std::string("refusing to log record: ") + e.what());
  }
  write(record);
  ++emitted_;
}

void JsonlSink::write(const MetricsRecord& record) {
  out_ << to_jsonl(record) << '\n';
  out_.flush();
}

void truncate_log(const std::string& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimulationError("cannot open log " + path + " for resume");
  std::string kept;
  std::string line;
  std::size_t count = 0;
  while (count < n && std::getline(in, line)) {
    if (in.eof()) break;  // unterminated last line is a torn write
    kept += line;
    kept += '\n';
    ++count;
  }
  in.close();
  if (count < n) {
    throw SimulationError("log " + path + " has " + std::to_string(count) +
                          " complete records, checkpoint expects " + std::to_string(n));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << kept;
  if (!out) throw SimulationError("cannot rewrite log " + path);
}

}  // namespace fedsim
