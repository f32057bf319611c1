// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structured simulation events and their JSONL encoding. One record per line,
// keys always present and always in this order:
//
//   run_id, round, event, client_id, t_start_s, t_end_s, mem_mib, power_w,
//   util_pct, energy_j, n_samples, loss, accuracy, staleness, estimated
//
// Absent optional values are JSON null. Times are virtual seconds.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

enum class EventKind {
  kTrainWindow,
  kAggregate,
  kEval,
  kDropout,
  kOom,
  kStalled,
  kRunEnd,  // terminal marker; a log without it is incomplete
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view name);

struct MetricsRecord {
  std::string run_id;
  std::size_t round = 0;
  EventKind event = EventKind::kEval;
  std::optional<std::string> client_id;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  double mem_mib = 0.0;
  double power_w = 0.0;
  double util_pct = 0.0;
  double energy_j = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> loss;
  std::optional<double> accuracy;
  std::optional<std::uint64_t> staleness;
  bool estimated = false;

  double duration_s() const { return t_end_s - t_start_s; }

  /// Throws std::invalid_argument when t_end < t_start or energy does not
  /// equal power x duration within 1e-6 relative.
  void validate() const;

  bool operator==(const MetricsRecord&) const = default;
};

/// One JSON object, no trailing newline. Doubles use round-trip exact
/// formatting.
std::string to_jsonl(const MetricsRecord& record);
/// Throws std::invalid_argument on malformed input.
MetricsRecord parse_record(std::string_view line);

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  /// Validates and records; refuses (throws) records breaking an invariant.
  void emit(const MetricsRecord& record);
  std::size_t emitted() const { return emitted_; }

 protected:
  virtual void write(const MetricsRecord& record) = 0;

 private:
  std::size_t emitted_ = 0;
};

class JsonlSink final : public MetricsSink {
 public:
  explicit JsonlSink(std::ostream& out) : out_(out) {}

 protected:
  void write(const MetricsRecord& record) override;

 private:
  std::ostream& out_;
};

class VectorSink final : public MetricsSink {
 public:
  const std::vector<MetricsRecord>& records() const { return records_; }

 protected:
  void write(const MetricsRecord& record) override { records_.push_back(record); }

 private:
  std::vector<MetricsRecord> records_;
};

class NullSink final : public MetricsSink {
 protected:
  void write(const MetricsRecord&) override {}
};

/// Keeps the first `n` lines of a log file, dropping the rest. Used when a
/// run resumes from a checkpoint taken after `n` records.
void truncate_log(const std::string& path, std::size_t n);

}  // namespace fedsim
