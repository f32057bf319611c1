// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/scenarios.hpp"

#include <cmath>

#include "fedsim/error.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kShiftSeed = 7001;

struct Builtin {
  const char* name;
  const char* description;
  ExperimentConfig (*make)();
};

ExperimentConfig base(std::string name, PartitionPlan plan, double scale) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.data.plan = std::move(plan);
  c.data.scale = scale;
  return c;
}

void default_clients(ExperimentConfig& c) {
  c.clients.clear();
  const auto& plan = c.data.plan;
  for (std::size_t r = 0; r < plan.n_clients(); ++r) {
    if (plan.eval_client && *plan.eval_client == r) continue;
    ClientSpec s;
    s.id = plan.client_ids[r];
    s.shards = {r};
    s.batch = static_cast<int>(c.train.batch_size);
    c.clients.push_back(std::move(s));
  }
}

// A common offset on every sample (camera bias). Training then needs many
// small steps, so accuracy keeps rising over the rounds.
void add_camera_offset(ExperimentConfig& c) {
  c.task.scenario_shifts["camera"] = seeded_shift(c.task.n_features, 8.0, kShiftSeed + 3, 0);
  for (const auto& id : c.data.plan.client_ids) c.data.plan.scenario_mix[id] = {{"camera", 1.0}};
  c.task.noise_sigma = 1.5;
}

ExperimentConfig kitti_sync() {
  auto c = base("kitti-sync", builtin_plan("kitti-4"), 0.1);
  add_camera_offset(c);
  c.train.local_epochs = 1;
  c.train.learning_rate = 0.004;
  default_clients(c);
  return c;
}

ExperimentConfig bdd_skew(std::string name) {
  auto c = base(std::move(name), bdd_skew_plan(), 0.005);
  c.task.noise_sigma = 0.5;
  c.rounds = 20;
  c.train.local_epochs = 5;
  c.train.learning_rate = 0.1;
  default_clients(c);
  return c;
}

ExperimentConfig bdd_dropout_dual() {
  auto c = dual_dropout(bdd_skew("bdd-dropout-dual"), "C1", "C2");
  c.name = "bdd-dropout-dual";
  return c;
}

PartitionPlan overlap_partitions() {
  auto kitti = scale_plan(builtin_plan("kitti-4"), 0.1);
  const std::vector<double> fractions(60, 1.0 / 60.0);
  auto plan = fraction_split(kitti.class_names, kitti.totals, fractions);
  plan.name = "kitti-60";
  return plan;
}

ExperimentConfig overlap_60() {
  auto c = base("overlap-60", overlap_partitions(), 1.0);
  add_camera_offset(c);
  c.train.local_epochs = 1;
  c.train.learning_rate = 0.02;
  const auto ov = overlap_split(60, 5);
  for (std::size_t i = 0; i < 60; ++i) {
    ClientSpec s;
    s.id = c.data.plan.client_ids[i];
    for (auto p : ov.assignment[i]) s.shards.push_back(p - 1);
    c.clients.push_back(std::move(s));
  }
  return c;
}

ExperimentConfig hetero_resolution() {
  auto c = kitti_sync();
  c.name = "hetero-resolution";
  for (auto& s : c.clients) s.resolution = 320;
  return c;
}

std::vector<std::pair<std::string, std::vector<double>>> condition_shifts(std::size_t d) {
  // Lighting and weather each move the features; a cell gets the sum.
  std::vector<std::pair<std::string, std::vector<double>>> out;
  const char* lighting[] = {"Daytime", "Dawn/Dusk", "Night"};
  const char* weather[] = {"Clear", "Overcast", "Cloudy", "Rainy", "Snowy"};
  const double lighting_norm[] = {0.0, 2.0, 4.0};
  const double weather_norm[] = {0.0, 0.5, 0.5, 4.0, 4.0};
  for (std::size_t l = 0; l < 3; ++l) {
    const auto lv = seeded_shift(d, lighting_norm[l], kShiftSeed + 1, l);
    for (std::size_t w = 0; w < 5; ++w) {
      const auto wv = seeded_shift(d, weather_norm[w], kShiftSeed + 2, w);
      std::vector<double> v(d);
      for (std::size_t j = 0; j < d; ++j) v[j] = lv[j] + wv[j];
      out.emplace_back(std::string(lighting[l]) + "|" + weather[w], std::move(v));
    }
  }
  return out;
}

ExperimentConfig weather_base(std::string name) {
  auto c = base(std::move(name), builtin_plan("weather-5"), 0.05);
  for (auto& [tag, v] : condition_shifts(c.task.n_features)) c.task.scenario_shifts[tag] = v;
  c.train.local_epochs = 2;
  c.train.learning_rate = 0.02;
  return c;
}

ExperimentConfig lighting_crossdomain() {
  auto c = weather_base("lighting-crossdomain");
  c.data.train_columns = {"Daytime"};
  c.data.eval_columns = {"Daytime"};
  c.data.extra_evals = {{"Night", {"Night"}, {}}};
  default_clients(c);
  return c;
}

const Builtin kBuiltins[] = {
    {"kitti-sync", "kitti-4 plan, FedAvg, 4 clients, 10 rounds", kitti_sync},
    {"bdd-dropout-dual", "bdd-8 client sizes, two private classes per client pair, C1 and C2 absent in every round",
     bdd_dropout_dual},
    {"overlap-60", "60 clients over 60 kitti partitions, sliding window of 5", overlap_60},
    {"hetero-resolution", "kitti-4 plan, every client at 320 px; upgrade one client to compare",
     hetero_resolution},
    {"lighting-crossdomain", "weather-5 plan, trained on daytime cells, tested on day and night",
     lighting_crossdomain},
};

}  // namespace

PartitionPlan bdd_skew_plan() {
  const auto bdd = builtin_plan("bdd-8");
  // Each client pair holds two classes nobody else has.
  const std::vector<std::string> classes{"Car", "Traffic_sign", "Traffic_light", "Pedestrian",
                                         "Truck", "Bus", "Bike", "Motor"};
  PartitionPlan p;
  p.name = "bdd-8-skew";
  p.kind = PlanKind::kClass;
  p.class_names = classes;
  p.client_ids = bdd.client_ids;
  const double half[] = {0.5, 0.5};
  for (std::size_t k = 0; k < bdd.n_clients(); ++k) {
    std::vector<std::size_t> row(classes.size(), 0);
    const auto parts = largest_remainder(bdd.client_total(k), half);
    row[2 * (k / 2)] = parts[0];
    row[2 * (k / 2) + 1] = parts[1];
    p.counts.push_back(std::move(row));
  }
  p.totals = p.column_sums();
  p.validate();
  return p;
}

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltins) out.emplace_back(b.name);
  return out;
}

std::string scenario_description(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (name == b.name) return b.description;
  }
  throw ConfigError("unknown scenario \"" + std::string(name) + "\"");
}

ExperimentConfig builtin_scenario(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (name == b.name) {
      auto c = b.make();
      c.validate();
      return c;
    }
  }
  throw ConfigError("unknown scenario \"" + std::string(name) + "\"");
}

ExperimentConfig with_seed(ExperimentConfig cfg, std::uint64_t seed) {
  cfg.master_seed = seed;
  return cfg;
}

ExperimentConfig with_strategy(ExperimentConfig cfg, Strategy s, double prox_mu) {
  cfg.strategy = s;
  cfg.train.prox_mu = prox_mu;
  return cfg;
}

ExperimentConfig dual_dropout(ExperimentConfig cfg, const std::string& a, const std::string& b) {
  cfg.name = "bdd-dropout-" + a + "-" + b;
  for (auto& s : cfg.clients) {
    s.dropout = {};
    if (s.id == a || s.id == b) {
      s.dropout.mode = DropoutRule::Mode::kAbsentRounds;
      for (std::size_t r = 1; r <= cfg.rounds; ++r) s.dropout.absent_rounds.insert(r);
    }
  }
  return cfg;
}

ExperimentConfig speed_skew_scenario() {
  auto c = bdd_skew("bdd-speed-skew");
  for (std::size_t i = 0; i < c.clients.size(); ++i) {
    c.clients[i].device.speed_factor = i % 2 == 0 ? 4.0 : 1.0;
  }
  return c;
}

ExperimentConfig disjoint_scenario() {
  auto c = overlap_60();
  c.name = "disjoint-60";
  for (std::size_t i = 0; i < c.clients.size(); ++i) c.clients[i].shards = {i};
  return c;
}

ExperimentConfig upgrade_resolution(ExperimentConfig cfg, const std::string& client, int resolution,
                                    int batch) {
  for (auto& s : cfg.clients) {
    if (s.id == client) {
      s.resolution = resolution;
      s.batch = batch;
      cfg.name += "-" + client + "-" + std::to_string(resolution);
      return cfg;
    }
  }
  throw ConfigError("unknown client \"" + client + "\"");
}

ExperimentConfig weather_crossdomain_scenario() {
  auto c = weather_base("weather-crossdomain");
  c.data.train_columns = {"Clear"};
  c.data.eval_columns = {"Clear"};
  c.data.extra_evals = {{"Rainy+Snowy", {"Rainy", "Snowy"}, {}}};
  default_clients(c);
  return c;
}

ExperimentConfig scale_scenario(std::size_t n_clients, std::size_t per_client, std::size_t rounds) {
  const auto task = default_task();
  std::vector<std::string> names;
  for (std::size_t k = 0; k < task.n_classes; ++k) names.push_back("class" + std::to_string(k));
  const std::size_t total = n_clients * per_client;
  std::vector<std::size_t> totals(task.n_classes, total / task.n_classes);
  totals[0] += total % task.n_classes;
  const std::vector<double> fractions(n_clients, 1.0 / static_cast<double>(n_clients));
  auto plan = fraction_split(names, totals, fractions);
  plan.name = "scale-" + std::to_string(n_clients);
  auto c = base("scale-" + std::to_string(n_clients), std::move(plan), 1.0);
  c.rounds = rounds;
  c.data.holdout_ratio = 1.0;
  c.train.local_epochs = 1;
  default_clients(c);
  return c;
}

}  // namespace fedsim
