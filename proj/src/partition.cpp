// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

std::vector<std::string> numbered_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 1; i <= n; ++i) ids.push_back("C" + std::to_string(i));
  return ids;
}

// Table rows are per class; plans are per client.
PartitionPlan from_class_rows(std::string name, std::vector<std::string> classes,
                              const std::vector<std::vector<std::size_t>>& rows) {
  PartitionPlan p;
  p.name = std::move(name);
  p.kind = PlanKind::kClass;
  p.class_names = std::move(classes);
  const std::size_t n_clients = rows.front().size();
  p.client_ids = numbered_ids(n_clients);
  p.counts.assign(n_clients, std::vector<std::size_t>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    for (std::size_t k = 0; k < n_clients; ++k) p.counts[k][c] = rows[c][k];
  }
  p.totals = p.column_sums();
  return p;
}

PartitionPlan kitti_plan() {
  return from_class_rows("kitti-4",
                         {"Car", "Van", "Truck", "Pedestrian", "Person_sitting", "Cyclist",
                          "Tram", "Misc"},
                         {
                             {11508, 5920, 2925, 2823},
                             {1173, 615, 264, 280},
                             {434, 228, 105, 114},
                             {1814, 934, 425, 426},
                             {117, 29, 7, 17},
                             {636, 321, 170, 162},
                             {210, 92, 28, 92},
                             {395, 207, 91, 89},
                         });
}

// The "train" class is not part of the split.
PartitionPlan bdd_plan() {
  return from_class_rows(
      "bdd-8",
      {"Pedestrian", "Rider", "Car", "Truck", "Bus", "Motor", "Bike", "Traffic_light",
       "Traffic_sign"},
      {
          {46279, 22441, 11381, 5805, 2690, 1385, 703, 665},
          {2325, 1088, 577, 291, 138, 48, 20, 30},
          {356110, 178724, 88719, 45365, 21885, 11284, 5721, 5403},
          {14909, 7507, 3705, 1935, 976, 476, 228, 235},
          {5780, 2968, 1441, 727, 347, 214, 105, 90},
          {1449, 736, 403, 225, 118, 32, 17, 22},
          {3820, 1698, 926, 446, 164, 76, 35, 45},
          {92792, 46558, 23342, 11796, 5659, 3040, 1495, 1435},
          {120510, 59410, 30131, 14896, 7307, 3812, 1787, 1833},
      });
}

}  // namespace

std::size_t PartitionPlan::client_total(std::size_t client) const {
  const auto& row = counts.at(client);
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

std::size_t PartitionPlan::grand_total() const {
  std::size_t t = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) t += client_total(k);
  return t;
}

std::vector<std::size_t> PartitionPlan::column_sums() const {
  std::vector<std::size_t> sums(class_names.size(), 0);
  for (const auto& row : counts) {
    for (std::size_t c = 0; c < row.size() && c < sums.size(); ++c) sums[c] += row[c];
  }
  return sums;
}

void PartitionPlan::validate() const {
  if (client_ids.empty()) throw ConfigError("plan.client_ids: at least one client required");
  if (class_names.empty()) throw ConfigError("plan.class_names: at least one column required");
  {
    auto sorted = client_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("plan.client_ids: duplicate client id");
    }
  }
  if (counts.size() != client_ids.size()) {
    throw ConfigError("plan.counts: expected one row per client");
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k].size() != class_names.size()) {
      throw ConfigError("plan.counts[" + std::to_string(k) + "]: expected " +
                        std::to_string(class_names.size()) + " columns");
    }
    if (client_total(k) == 0) {
      throw ConfigError("plan.counts[" + std::to_string(k) + "]: client " + client_ids[k] +
                        " holds no samples");
    }
  }
  if (totals.size() != class_names.size()) {
    throw ConfigError("plan.totals: expected one total per column");
  }
  const auto sums = column_sums();
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (sums[c] != totals[c]) {
      throw ConfigError("plan.totals[" + class_names[c] + "]: header says " +
                        std::to_string(totals[c]) + ", counts add up to " +
                        std::to_string(sums[c]));
    }
  }
  if (!fractions.empty()) {
    if (fractions.size() != client_ids.size()) {
      throw ConfigError("plan.fractions: expected one fraction per client");
    }
    check_fractions(fractions, "plan.fractions");
  }
  for (const auto& [id, mix] : scenario_mix) {
    if (std::find(client_ids.begin(), client_ids.end(), id) == client_ids.end()) {
      throw ConfigError("plan.scenario_mix: unknown client \"" + id + "\"");
    }
    double s = 0.0;
    for (const auto& [tag, f] : mix) {
      if (!(f >= 0.0)) throw ConfigError("plan.scenario_mix." + id + ": negative fraction");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ConfigError("plan.scenario_mix." + id + ": fractions must sum to 1");
    }
  }
  if (eval_client && *eval_client >= client_ids.size()) {
    throw ConfigError("plan.eval_client: index out of range");
  }
}

std::vector<std::string> builtin_plan_names() {
  return {"kitti-4", "bdd-8", "nuscenes-frac-4", "weather-5"};
}

std::vector<std::string> nuscenes_class_names() {
  return {"animal",
          "human.pedestrian.adult",
          "human.pedestrian.child",
          "human.pedestrian.construction_worker",
          "human.pedestrian.personal_mobility",
          "human.pedestrian.police_officer",
          "human.pedestrian.stroller",
          "movable_object.barrier",
          "movable_object.debris",
          "movable_object.pushable_pullable",
          "movable_object.trafficcone",
          "static_object.bicycle_rack",
          "vehicle.bicycle",
          "vehicle.bus.bendy",
          "vehicle.bus.rigid",
          "vehicle.car",
          "vehicle.construction",
          "vehicle.motorcycle",
          "vehicle.trailer",
          "vehicle.truck"};
}

PartitionPlan nuscenes_plan(std::span<const std::size_t> totals_per_class) {
  auto names = nuscenes_class_names();
  if (totals_per_class.size() != names.size()) {
    throw ConfigError("nuscenes-frac-4 needs " + std::to_string(names.size()) + " class totals");
  }
  const double fracs[] = {0.5, 0.25, 0.125, 0.125};
  auto plan = fraction_split(names, totals_per_class, fracs);
  plan.name = "nuscenes-frac-4";
  return plan;
}

std::vector<ScenarioCell> lighting_weather_table() {
  return {
      {"Daytime", "Clear", 14218},  {"Daytime", "Overcast", 8590}, {"Daytime", "Cloudy", 4900},
      {"Daytime", "Rainy", 2930},   {"Daytime", "Snowy", 3284},    {"Dawn/Dusk", "Clear", 2314},
      {"Dawn/Dusk", "Overcast", 1329}, {"Dawn/Dusk", "Cloudy", 665}, {"Dawn/Dusk", "Rainy", 384},
      {"Dawn/Dusk", "Snowy", 510},  {"Night", "Clear", 26158},     {"Night", "Overcast", 90},
      {"Night", "Cloudy", 54},      {"Night", "Rainy", 2494},      {"Night", "Snowy", 2522},
  };
}

PartitionPlan builtin_plan(std::string_view name) {
  if (name == "kitti-4") return kitti_plan();
  if (name == "bdd-8") return bdd_plan();
  if (name == "nuscenes-frac-4") {
    const std::vector<std::size_t> totals(nuscenes_class_names().size(), 800);
    return nuscenes_plan(totals);
  }
  if (name == "weather-5") {
    const auto table = lighting_weather_table();
    const double fracs[] = {0.30, 0.25, 0.20, 0.15, 0.10};
    auto plan = scenario_split(table, fracs, 2);
    plan.name = "weather-5";
    return plan;
  }
  throw ConfigError("unknown built-in plan \"" + std::string(name) + "\"");
}

void check_fractions(std::span<const double> fractions, std::string_view field) {
  if (fractions.empty()) throw ConfigError(std::string(field) + ": at least one fraction required");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ConfigError(std::string(field) + ": every fraction must be > 0");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(std::string(field) + ": fractions sum to " + std::to_string(sum) +
                      ", must be 1 within 1e-9");
  }
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> fractions) {
  const std::size_t n = fractions.size();
  std::vector<std::size_t> parts(n, 0);
  if (n == 0) return parts;
  const double sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  std::vector<double> rem(n, 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double exact = static_cast<double>(total) * (fractions[k] / sum);
    const double fl = std::floor(exact);
    parts[k] = static_cast<std::size_t>(fl);
    rem[k] = exact - fl;
    assigned += parts[k];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  // Rounding noise in `exact` can overshoot; take back from the smallest remainders.
  for (std::size_t i = n; assigned > total && i > 0; --i) {
    const auto k = order[i - 1];
    if (parts[k] > 0) {
      --parts[k];
      --assigned;
    }
  }
  for (std::size_t i = 0; assigned < total; i = (i + 1) % n) {
    ++parts[order[i]];
    ++assigned;
  }
  return parts;
}

PartitionPlan fraction_split(const std::vector<std::string>& class_names,
                             std::span<const std::size_t> totals,
                             std::span<const double> fractions) {
  check_fractions(fractions, "fractions");
  if (class_names.size() != totals.size()) {
    throw ConfigError("fraction_split: one total per class required");
  }
  PartitionPlan p;
  p.name = "fraction-split";
  p.kind = PlanKind::kClass;
  p.class_names = class_names;
  p.client_ids = numbered_ids(fractions.size());
  p.totals.assign(totals.begin(), totals.end());
  p.fractions.assign(fractions.begin(), fractions.end());
  p.counts.assign(fractions.size(), std::vector<std::size_t>(class_names.size(), 0));
  for (std::size_t c = 0; c < totals.size(); ++c) {
    const auto parts = largest_remainder(totals[c], fractions);
    for (std::size_t k = 0; k < parts.size(); ++k) p.counts[k][c] = parts[k];
  }
  return p;
}

void OverlapPlan::validate() const {
  if (window < 1 || window > n_clients) {
    throw ConfigError("overlap: window must satisfy 1 <= window <= n_clients");
  }
  if (assignment.size() != n_clients) throw ConfigError("overlap: one assignment per client");
  std::vector<std::size_t> multiplicity(n_partitions + 1, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto& parts = assignment[i];
    if (parts.size() != window) {
      throw ConfigError("overlap: client " + std::to_string(i + 1) + " holds " +
                        std::to_string(parts.size()) + " partitions, expected " +
                        std::to_string(window));
    }
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto p = parts[j];
      if (p < 1 || p > n_partitions) throw ConfigError("overlap: partition index out of range");
      const auto expected = (i + j) % n_partitions + 1;
      if (p != expected) {
        throw ConfigError("overlap: client " + std::to_string(i + 1) +
                          " window is not consecutive");
      }
      ++multiplicity[p];
    }
  }
  for (std::size_t p = 1; p <= n_partitions; ++p) {
    if (multiplicity[p] != window) {
      throw ConfigError("overlap: partition " + std::to_string(p) + " held by " +
                        std::to_string(multiplicity[p]) + " clients, expected " +
                        std::to_string(window));
    }
  }
}

std::vector<std::size_t> OverlapPlan::holders(std::size_t partition) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < window; ++j) {
    // client i holds partition p at offset j iff i = p - j (mod n)
    const auto client = (partition - 1 + n_clients - j % n_clients) % n_clients + 1;
    const auto& parts = assignment.at(client - 1);
    if (std::find(parts.begin(), parts.end(), partition) != parts.end()) out.push_back(client);
  }
  return out;
}

OverlapPlan overlap_split(std::size_t n_clients, std::size_t window) {
  if (window < 1) throw ConfigError("overlap: window must be >= 1");
  if (window > n_clients) {
    throw ConfigError("overlap: window " + std::to_string(window) + " exceeds " +
                      std::to_string(n_clients) + " clients");
  }
  OverlapPlan plan;
  plan.n_clients = n_clients;
  plan.n_partitions = n_clients;
  plan.window = window;
  plan.assignment.resize(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    for (std::size_t j = 0; j < window; ++j) {
      plan.assignment[i].push_back((i + j) % n_clients + 1);
    }
  }
  return plan;
}

PartitionPlan scenario_split(std::span<const ScenarioCell> table, std::span<const double> fractions,
                             std::size_t test_client) {
  check_fractions(fractions, "fractions");
  if (test_client >= fractions.size()) {
    throw ConfigError("scenario_split: test client index out of range");
  }
  PartitionPlan p;
  p.name = "scenario-split";
  p.kind = PlanKind::kScenario;
  p.client_ids = numbered_ids(fractions.size());
  p.fractions.assign(fractions.begin(), fractions.end());
  p.counts.assign(fractions.size(), {});
  for (const auto& cell : table) {
    p.class_names.push_back(cell.tag());
    p.totals.push_back(cell.count);
    const auto parts = largest_remainder(cell.count, fractions);
    for (std::size_t k = 0; k < parts.size(); ++k) p.counts[k].push_back(parts[k]);
  }
  p.eval_client = test_client;
  return p;
}

PartitionPlan scale_plan(const PartitionPlan& plan, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ConfigError("data.scale: must be finite and > 0");
  }
  PartitionPlan out = plan;
  if (factor == 1.0) return out;
  for (auto& row : out.counts) {
    for (auto& v : row) v = static_cast<std::size_t>(std::llround(static_cast<double>(v) * factor));
  }
  out.totals = out.column_sums();
  for (std::size_t k = 0; k < out.counts.size(); ++k) {
    if (out.client_total(k) == 0) {
      throw ConfigError("data.scale: client " + out.client_ids[k] +
                        " has no samples left after scaling");
    }
  }
  return out;
}

bool column_matches(std::string_view column, std::string_view selector) {
  if (column.starts_with(selector)) return true;
  std::size_t start = 0;
  while (start <= column.size()) {
    const auto bar = column.find('|', start);
    const auto end = bar == std::string_view::npos ? column.size() : bar;
    if (column.substr(start, end - start) == selector) return true;
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return false;
}

PartitionPlan filter_columns(const PartitionPlan& plan, std::span<const std::string> selectors) {
  if (selectors.empty()) return plan;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < plan.class_names.size(); ++c) {
    for (const auto& pre : selectors) {
      if (column_matches(plan.class_names[c], pre)) {
        keep.push_back(c);
        break;
      }
    }
  }
  if (keep.empty()) throw ConfigError("column filter matches no plan column");
  PartitionPlan out = plan;
  out.class_names.clear();
  out.totals.clear();
  for (auto c : keep) {
    out.class_names.push_back(plan.class_names[c]);
    out.totals.push_back(plan.totals[c]);
  }
  for (std::size_t k = 0; k < plan.counts.size(); ++k) {
    out.counts[k].clear();
    for (auto c : keep) out.counts[k].push_back(plan.counts[k][c]);
  }
  return out;
}

}  // namespace fedsim
