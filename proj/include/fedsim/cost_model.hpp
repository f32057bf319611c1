// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Resource cost model calibrated from measured detector training runs:
// per-round training time, peak GPU memory, power and utilization ranges for
// three detector architectures over resolution x batch configurations.
//
// The calibration ships as data/calibration.json, compiled into the library
// (embedded_calibration_json) and replaceable at run time via
// load_calibration. Schema, version 1:
//
//   schema_version            1
//   reference_device          {mem_capacity_mib, speed_factor}
//   strategy_overhead         {fedavg, fedasync, fedprox}: time multipliers
//   idle                      {power_w, util_pct_range, estimated}
//   architectures.<tag>       tag in v5 | v8 | v11
//     training_power_w_range  [low, high] W over a whole training run
//     training_util_pct_range [low, high] %
//     fedprox_reference       {resolution, batch, fedavg_time_s, fedprox_time_s}
//     entries[]               {resolution, batch, train_time_s, peak_mem_mib,
//                              power_w_range, util_pct_range,
//                              infer_ms_per_image?: {dataset: ms},
//                              estimated: [field names not directly measured]}
//   reference_points[]        {architecture, dataset, batch, peak_mem_mib}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsim {

using Range = std::pair<double, double>;

struct CostEntry {
  int resolution = 0;
  int batch = 0;
  double train_time_s = 0.0;  // one reference round at full data volume
  double peak_mem_mib = 0.0;
  Range power_w{0.0, 0.0};
  Range util_pct{0.0, 0.0};
  std::map<std::string, double> infer_ms_per_image;
  bool time_estimated = false;
  bool memory_estimated = false;
  bool ranges_estimated = false;

  bool any_estimated() const { return time_estimated || memory_estimated || ranges_estimated; }
};

struct CostProfile {
  std::string architecture;
  Range training_power_w{0.0, 0.0};
  Range training_util_pct{0.0, 0.0};
  int fedprox_ref_resolution = 0;
  int fedprox_ref_batch = 0;
  double fedprox_ref_fedavg_time_s = 0.0;
  double fedprox_ref_fedprox_time_s = 0.0;
  std::vector<CostEntry> entries;

  const CostEntry* find(int resolution, int batch) const;
};

struct DeviceSpec {
  double mem_capacity_mib = 49140.0;
  double speed_factor = 1.0;

  void validate() const;
};

struct ReferencePoint {
  std::string architecture;
  std::string dataset;
  int batch = 0;
  double peak_mem_mib = 0.0;
};

struct Calibration {
  int schema_version = 1;
  DeviceSpec reference_device;
  std::map<std::string, double> strategy_overhead;
  double idle_power_w = 60.0;
  Range idle_util_pct{0.0, 10.0};
  bool idle_power_estimated = true;
  std::map<std::string, CostProfile> profiles;
  std::vector<ReferencePoint> reference_points;

  const CostProfile& profile(std::string_view architecture) const;
  double overhead(std::string_view strategy) const;
  void validate() const;
};

std::string_view embedded_calibration_json();
Calibration parse_calibration(std::string_view json_text);
Calibration load_calibration(const std::string& path);
/// Parsed once from the embedded JSON.
const Calibration& default_calibration();

struct LookupOptions {
  bool interpolate = true;
  bool allow_extrapolation = false;
};

/// Exact entry for a calibrated key. Otherwise interpolates every field
/// linearly in log2(batch) between the neighbouring calibrated batches at the
/// same resolution and marks the result estimated. Keys outside the
/// calibrated batch range throw ConfigError unless extrapolation is allowed.
CostEntry lookup(const CostProfile& profile, int resolution, int batch,
                 const LookupOptions& opts = {});

/// entry.train_time_s * data_fraction / speed_factor * strategy overhead.
double client_round_time(const CostEntry& entry, double data_fraction, const DeviceSpec& device,
                         std::string_view strategy, const Calibration& cal = default_calibration());

struct MemoryVerdict {
  bool feasible = true;
  double required_mib = 0.0;
  double capacity_mib = 0.0;
};

/// Infeasible iff the entry's peak memory exceeds the device capacity.
MemoryVerdict check_memory(const CostEntry& entry, const DeviceSpec& device);

enum class Phase { kTraining, kAggregationIdle };

struct PowerSample {
  double watts = 0.0;
  double util_pct = 0.0;
  bool estimated = false;
};

/// Training: watts and utilization drawn uniformly within the entry's ranges
/// from the stream keyed by `seed`. Idle: fixed idle power floor and
/// utilization drawn from the idle range.
PowerSample sample_power_and_util(const CostEntry& entry, Phase phase, std::uint64_t seed,
                                  const Calibration& cal = default_calibration());

/// Joules = mean watts x duration.
inline double energy_joules(double watts, double duration_s) { return watts * duration_s; }

}  // namespace fedsim
