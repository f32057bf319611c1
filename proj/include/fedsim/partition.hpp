// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Client data splits: the embedded KITTI / BDD100K class-count plans, fraction
// splits, overlapping-window shard assignment and lighting/weather cell splits.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

using ScenarioMix = std::map<std::string, double>;

enum class PlanKind {
  kClass,     // columns are object classes
  kScenario,  // columns are (lighting|weather) cells
};

struct PartitionPlan {
  std::string name;
  PlanKind kind = PlanKind::kClass;
  std::vector<std::string> client_ids;
  std::vector<std::string> class_names;
  /// Declared column totals; validate() checks the counts add up to them.
  std::vector<std::size_t> totals;
  std::vector<std::vector<std::size_t>> counts;  // client x column
  /// Split fractions, when the plan came from a fraction split.
  std::vector<double> fractions;
  /// Optional per-client scenario mix, keyed by client id.
  std::map<std::string, ScenarioMix> scenario_mix;
  /// Client whose share is held out for evaluation only.
  std::optional<std::size_t> eval_client;

  std::size_t n_clients() const { return client_ids.size(); }
  std::size_t n_columns() const { return class_names.size(); }
  std::size_t client_total(std::size_t client) const;
  std::size_t grand_total() const;
  std::vector<std::size_t> column_sums() const;

  /// Throws ConfigError naming the broken invariant.
  void validate() const;
};

/// Built-in plans: kitti-4, bdd-8, nuscenes-frac-4, weather-5.
PartitionPlan builtin_plan(std::string_view name);
std::vector<std::string> builtin_plan_names();

/// nuScenes 20-class fraction plan (50 / 25 / 12.5 / 12.5) over the given
/// per-class totals. builtin_plan uses 800 per class.
PartitionPlan nuscenes_plan(std::span<const std::size_t> totals_per_class);
std::vector<std::string> nuscenes_class_names();

/// Splits `total` into parts proportional to `fractions`: floors first, then
/// one extra unit to each of the largest fractional parts, ties to the lower
/// index. Parts always sum to `total`.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> fractions);

/// Checks fractions are positive and sum to 1 within 1e-9.
void check_fractions(std::span<const double> fractions, std::string_view field);

PartitionPlan fraction_split(const std::vector<std::string>& class_names,
                             std::span<const std::size_t> totals,
                             std::span<const double> fractions);

struct OverlapPlan {
  std::size_t n_clients = 0;
  std::size_t n_partitions = 0;
  std::size_t window = 0;
  /// assignment[i] lists the 1-based partitions of client i + 1.
  std::vector<std::vector<std::size_t>> assignment;

  /// Exact multiplicity check; throws ConfigError on the first violation.
  void validate() const;
  /// 1-based clients holding a 1-based partition, in assignment order of the
  /// window offset (client p, p-1, ..., wrapping).
  std::vector<std::size_t> holders(std::size_t partition) const;
};

OverlapPlan overlap_split(std::size_t n_clients, std::size_t window);

struct ScenarioCell {
  std::string lighting;
  std::string weather;
  std::size_t count = 0;

  std::string tag() const { return lighting + "|" + weather; }
};

/// Image counts per lighting x weather cell.
std::vector<ScenarioCell> lighting_weather_table();

PartitionPlan scenario_split(std::span<const ScenarioCell> table, std::span<const double> fractions,
                             std::size_t test_client);

/// Multiplies every count by `factor` and rounds half away from zero. Totals
/// are recomputed. Throws ConfigError when a client ends up with no samples.
PartitionPlan scale_plan(const PartitionPlan& plan, double factor);

/// A selector matches a column it prefixes or one of its '|' separated parts,
/// so "Night" and "Rainy" both match "Night|Rainy".
bool column_matches(std::string_view column, std::string_view selector);

/// Keeps the columns matched by any selector (all columns when empty).
PartitionPlan filter_columns(const PartitionPlan& plan, std::span<const std::string> selectors);

}  // namespace fedsim
