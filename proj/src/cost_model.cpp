// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"
#include "json.hpp"

namespace fedsim {
namespace {

using nlohmann::json;

Range parse_range(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError("calibration." + field + ": expected [low, high]");
  }
  Range r{j[0].get<double>(), j[1].get<double>()};
  if (r.first > r.second) throw ConfigError("calibration." + field + ": low > high");
  return r;
}

bool lists(const json& arr, std::string_view name) {
  return std::any_of(arr.begin(), arr.end(),
                     [&](const json& v) { return v.is_string() && v.get<std::string>() == name; });
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

Range lerp(const Range& a, const Range& b, double t) {
  return {lerp(a.first, b.first, t), lerp(a.second, b.second, t)};
}

}  // namespace

const CostEntry* CostProfile::find(int resolution, int batch) const {
  for (const auto& e : entries) {
    if (e.resolution == resolution && e.batch == batch) return &e;
  }
  return nullptr;
}

void DeviceSpec::validate() const {
  if (!(mem_capacity_mib > 0.0)) throw ConfigError("device.mem_capacity_mib: must be > 0");
  if (!(speed_factor > 0.0) || !std::isfinite(speed_factor)) {
    throw ConfigError("device.speed_factor: must be finite and > 0");
  }
}

const CostProfile& Calibration::profile(std::string_view architecture) const {
  auto it = profiles.find(std::string(architecture));
  if (it == profiles.end()) {
    throw ConfigError("no calibration profile for architecture \"" + std::string(architecture) +
                      "\"");
  }
  return it->second;
}

double Calibration::overhead(std::string_view strategy) const {
  auto it = strategy_overhead.find(std::string(strategy));
  if (it == strategy_overhead.end()) {
    throw ConfigError("no strategy overhead for \"" + std::string(strategy) + "\"");
  }
  return it->second;
}

void Calibration::validate() const {
  if (schema_version != 1) throw ConfigError("calibration.schema_version: only 1 is supported");
  reference_device.validate();
  for (const auto& [arch, prof] : profiles) {
    if (prof.entries.empty()) throw ConfigError("calibration." + arch + ": no entries");
    for (const auto& e : prof.entries) {
      const auto where = "calibration." + arch + "@" + std::to_string(e.resolution) + "x" +
                         std::to_string(e.batch);
      if (!(e.train_time_s > 0.0)) throw ConfigError(where + ".train_time_s: must be > 0");
      if (!(e.peak_mem_mib > 0.0)) throw ConfigError(where + ".peak_mem_mib: must be > 0");
    }
  }
}

Calibration parse_calibration(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("calibration: invalid JSON: ") + e.what());
  }
  Calibration cal;
  try {
    cal.schema_version = doc.at("schema_version").get<int>();
    const auto& dev = doc.at("reference_device");
    cal.reference_device.mem_capacity_mib = dev.at("mem_capacity_mib").get<double>();
    cal.reference_device.speed_factor = dev.at("speed_factor").get<double>();
    for (const auto& [k, v] : doc.at("strategy_overhead").items()) {
      cal.strategy_overhead[k] = v.get<double>();
    }
    const auto& idle = doc.at("idle");
    cal.idle_power_w = idle.at("power_w").get<double>();
    cal.idle_util_pct = parse_range(idle.at("util_pct_range"), "idle.util_pct_range");
    cal.idle_power_estimated = lists(idle.value("estimated", json::array()), "power_w");
    for (const auto& [arch, pj] : doc.at("architectures").items()) {
      CostProfile prof;
      prof.architecture = arch;
      prof.training_power_w = parse_range(pj.at("training_power_w_range"), arch + ".power");
      prof.training_util_pct = parse_range(pj.at("training_util_pct_range"), arch + ".util");
      if (pj.contains("fedprox_reference")) {
        const auto& fr = pj.at("fedprox_reference");
        prof.fedprox_ref_resolution = fr.at("resolution").get<int>();
        prof.fedprox_ref_batch = fr.at("batch").get<int>();
        prof.fedprox_ref_fedavg_time_s = fr.at("fedavg_time_s").get<double>();
        prof.fedprox_ref_fedprox_time_s = fr.at("fedprox_time_s").get<double>();
      }
      for (const auto& ej : pj.at("entries")) {
        CostEntry e;
        e.resolution = ej.at("resolution").get<int>();
        e.batch = ej.at("batch").get<int>();
        e.train_time_s = ej.at("train_time_s").get<double>();
        e.peak_mem_mib = ej.at("peak_mem_mib").get<double>();
        e.power_w = parse_range(ej.at("power_w_range"), arch + ".power_w_range");
        e.util_pct = parse_range(ej.at("util_pct_range"), arch + ".util_pct_range");
        if (ej.contains("infer_ms_per_image")) {
          for (const auto& [ds, ms] : ej.at("infer_ms_per_image").items()) {
            e.infer_ms_per_image[ds] = ms.get<double>();
          }
        }
        const auto est = ej.value("estimated", json::array());
        e.time_estimated = lists(est, "train_time_s");
        e.memory_estimated = lists(est, "peak_mem_mib");
        e.ranges_estimated = lists(est, "power_w_range") || lists(est, "util_pct_range");
        if (prof.find(e.resolution, e.batch)) {
          throw ConfigError("calibration." + arch + ": duplicate entry");
        }
        prof.entries.push_back(std::move(e));
      }
      cal.profiles[arch] = std::move(prof);
    }
    for (const auto& rj : doc.value("reference_points", json::array())) {
      cal.reference_points.push_back({rj.at("architecture").get<std::string>(),
                                      rj.at("dataset").get<std::string>(),
                                      rj.at("batch").get<int>(),
                                      rj.at("peak_mem_mib").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  cal.validate();
  return cal;
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calibration(ss.str());
}

const Calibration& default_calibration() {
  static const Calibration cal = parse_calibration(embedded_calibration_json());
  return cal;
}

CostEntry lookup(const CostProfile& profile, int resolution, int batch,
                 const LookupOptions& opts) {
  if (const auto* exact = profile.find(resolution, batch)) return *exact;
  const auto where = profile.architecture + "@" + std::to_string(resolution) + "x" +
                     std::to_string(batch);
  if (!opts.interpolate) throw ConfigError("no calibrated cost entry for " + where);
  if (batch < 1) throw ConfigError("batch must be >= 1 for " + where);

  std::vector<const CostEntry*> row;
  for (const auto& e : profile.entries) {
    if (e.resolution == resolution) row.push_back(&e);
  }
  if (row.empty()) throw ConfigError("resolution " + std::to_string(resolution) +
                                     " is not calibrated for " + profile.architecture);
  std::sort(row.begin(), row.end(),
            [](const CostEntry* a, const CostEntry* b) { return a->batch < b->batch; });

  const bool inside = batch > row.front()->batch && batch < row.back()->batch;
  if (!inside && !opts.allow_extrapolation) {
    throw ConfigError("batch " + std::to_string(batch) + " lies outside the calibrated range for " +
                      where);
  }
  if (row.size() < 2) {
    throw ConfigError("only one calibrated batch at this resolution; cannot estimate " + where);
  }
  std::size_t hi = 1;
  while (hi + 1 < row.size() && row[hi]->batch < batch) ++hi;
  const CostEntry& a = *row[hi - 1];
  const CostEntry& b = *row[hi];
  const double t = (std::log2(batch) - std::log2(a.batch)) / (std::log2(b.batch) - std::log2(a.batch));

  CostEntry e;
  e.resolution = resolution;
  e.batch = batch;
  e.train_time_s = lerp(a.train_time_s, b.train_time_s, t);
  e.peak_mem_mib = lerp(a.peak_mem_mib, b.peak_mem_mib, t);
  e.power_w = lerp(a.power_w, b.power_w, t);
  e.util_pct = lerp(a.util_pct, b.util_pct, t);
  e.time_estimated = e.memory_estimated = e.ranges_estimated = true;
  if (!(e.train_time_s > 0.0) || !(e.peak_mem_mib > 0.0)) {
    throw ConfigError("extrapolated cost for " + where + " is not positive");
  }
  return e;
}

double client_round_time(const CostEntry& entry, double data_fraction, const DeviceSpec& device,
                         std::string_view strategy, const Calibration& cal) {
  if (!(data_fraction > 0.0)) throw std::invalid_argument("data_fraction must be > 0");
  return entry.train_time_s * data_fraction / device.speed_factor * cal.overhead(strategy);
}

MemoryVerdict check_memory(const CostEntry& entry, const DeviceSpec& device) {
  return {entry.peak_mem_mib <= device.mem_capacity_mib, entry.peak_mem_mib,
          device.mem_capacity_mib};
}

PowerSample sample_power_and_util(const CostEntry& entry, Phase phase, std::uint64_t seed,
                                  const Calibration& cal) {
  CounterRng rng(seed);
  PowerSample s;
  if (phase == Phase::kTraining) {
    s.watts = rng.uniform(entry.power_w.first, entry.power_w.second);
    s.util_pct = rng.uniform(entry.util_pct.first, entry.util_pct.second);
    s.estimated = entry.ranges_estimated;
  } else {
    s.watts = cal.idle_power_w;
    s.util_pct = rng.uniform(cal.idle_util_pct.first, cal.idle_util_pct.second);
    s.estimated = cal.idle_power_estimated;
  }
  return s;
}

}  // namespace fedsim
