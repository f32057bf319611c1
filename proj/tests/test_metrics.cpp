// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "fedsim/error.hpp"
#include "fedsim/metrics.hpp"
#include "test_support.hpp"

using namespace fedsim;

namespace {

MetricsRecord sample() {
  MetricsRecord r;
  r.run_id = "kitti-sync-fedavg-s7";
  r.round = 3;
  r.event = EventKind::kTrainWindow;
  r.client_id = "C2";
  r.t_start_s = 0.1;
  r.t_end_s = 936.0 / 3.0;
  r.mem_mib = 23552;
  r.power_w = 321.123456789;
  r.util_pct = 87.5;
  r.energy_j = r.power_w * (r.t_end_s - r.t_start_s);
  r.n_samples = 1234;
  r.loss = 0.6931471805599453;
  r.staleness = 2;
  r.estimated = true;
  return r;
}

}  // namespace

TEST_CASE("keys appear in the fixed order") {
  const auto line = to_jsonl(sample());
  const char* keys[] = {"run_id", "round",  "event",     "client_id", "t_start_s",
                        "t_end_s", "mem_mib", "power_w", "util_pct",  "energy_j",
                        "n_samples", "loss",  "accuracy", "staleness", "estimated"};
  std::size_t pos = 0;
  for (const char* k : keys) {
    const auto at = line.find(std::string("\"") + k + "\":", pos);
    REQUIRE(at != std::string::npos);
    pos = at;
  }
  CHECK(line.find("\"accuracy\":null") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("records round trip exactly") {
  const auto r = sample();
  CHECK(parse_record(to_jsonl(r)) == r);
  MetricsRecord bare;
  bare.run_id = "x";
  bare.event = EventKind::kRunEnd;
  const auto back = parse_record(to_jsonl(bare));
  CHECK(back == bare);
  CHECK_FALSE(back.client_id.has_value());
  CHECK_FALSE(back.staleness.has_value());
}

TEST_CASE("every event kind has a stable name") {
  for (auto k : {EventKind::kTrainWindow, EventKind::kAggregate, EventKind::kEval, EventKind::kDropout,
                 EventKind::kOom, EventKind::kStalled, EventKind::kRunEnd}) {
    CHECK(parse_event_kind(to_string(k)) == k);
  }
  CHECK(to_string(EventKind::kTrainWindow) == "train_window");
  CHECK_THROWS_AS(parse_event_kind("nap"), std::invalid_argument);
}

TEST_CASE("malformed lines are rejected") {
  CHECK_THROWS_AS(parse_record("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_record("{\"run_id\": 1}"), std::invalid_argument);
  auto line = to_jsonl(sample());
  line.replace(line.find("\"estimated\":true"), 16, "\"estimated\":3");
  CHECK_THROWS_AS(parse_record(line), std::invalid_argument);
}

TEST_CASE("sinks refuse records that break invariants") {
  VectorSink sink;
  auto r = sample();
  sink.emit(r);
  r.t_end_s = r.t_start_s - 1.0;
  r.energy_j = r.power_w * (r.t_end_s - r.t_start_s);
  CHECK_THROWS_AS(sink.emit(r), SimulationError);
  r = sample();
  r.energy_j *= 1.001;
  CHECK_THROWS_AS(sink.emit(r), SimulationError);
  CHECK(sink.emitted() == 1);
  CHECK(sink.records().size() == 1);
}

TEST_CASE("jsonl emission is byte identical across runs") {
  std::ostringstream a, b;
  JsonlSink sa(a), sb(b);
  for (int i = 0; i < 5; ++i) {
    auto r = sample();
    r.round = static_cast<std::size_t>(i);
    sa.emit(r);
    sb.emit(r);
  }
  CHECK(a.str() == b.str());
  const auto text = a.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("truncate_log keeps complete leading records") {
  fedsim::testing::TempDir dir("metrics");
  const auto path = dir.file("log.jsonl");
  {
    std::ofstream out(path);
    out << "a\nb\nc\ntorn";
  }
  truncate_log(path, 2);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "a\nb\n");
  CHECK_THROWS_AS(truncate_log(path, 5), SimulationError);
  {
    std::ofstream out(path);
    out << "a\nb\nc\ntorn";
  }
  CHECK_THROWS_AS(truncate_log(path, 4), SimulationError);
  CHECK_THROWS_AS(truncate_log(dir.file("missing"), 0), SimulationError);
}
