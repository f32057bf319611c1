// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/orchestrator.hpp"

namespace fedsim::testing {

inline SyntheticTask small_task(std::size_t classes = 3, std::size_t features = 4) {
  SyntheticTask t;
  t.n_classes = classes;
  t.n_features = features;
  t.noise_sigma = 1.0;
  t.class_means = seeded_class_means(classes, features, 99);
  t.scenario_shifts[kReferenceScenario] = std::vector<double>(features, 0.0);
  return t;
}

inline ParamVector random_params(std::size_t n, std::mt19937_64& gen, double scale = 0.5) {
  std::normal_distribution<double> d(0.0, scale);
  ParamVector w(n);
  for (double& v : w) v = d(gen);
  return w;
}

inline double l2_distance(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Two-client class-plan experiment that runs in milliseconds.
inline ExperimentConfig tiny_config(Strategy s = Strategy::kFedAvg, std::size_t rounds = 4) {
  ExperimentConfig c;
  c.name = "tiny";
  c.strategy = s;
  c.rounds = rounds;
  c.train.local_epochs = 1;
  c.train.learning_rate = 0.05;
  c.train.prox_mu = s == Strategy::kFedProx ? 0.01 : 0.0;
  c.data.plan.name = "tiny";
  c.data.plan.class_names = {"a", "b", "c", "d", "e", "f", "g", "h"};
  c.data.plan.client_ids = {"A", "B", "C"};
  c.data.plan.counts = {{20, 20, 20, 20, 10, 10, 10, 10},
                        {10, 10, 10, 10, 20, 20, 20, 20},
                        {5, 5, 5, 5, 5, 5, 5, 5}};
  c.data.plan.totals = c.data.plan.column_sums();
  for (std::size_t r = 0; r < 3; ++r) {
    ClientSpec spec;
    spec.id = c.data.plan.client_ids[r];
    spec.shards = {r};
    c.clients.push_back(spec);
  }
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("fedsim_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace fedsim::testing
