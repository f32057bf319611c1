// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in experiment configs and the variants used to compare them.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/orchestrator.hpp"

namespace fedsim {

/// bdd-8 client sizes; each client pair holds two classes of its own.
PartitionPlan bdd_skew_plan();

std::vector<std::string> builtin_scenario_names();
std::string scenario_description(std::string_view name);
/// Throws ConfigError for an unknown name.
ExperimentConfig builtin_scenario(std::string_view name);

ExperimentConfig with_seed(ExperimentConfig cfg, std::uint64_t seed);
ExperimentConfig with_strategy(ExperimentConfig cfg, Strategy s, double prox_mu = 0.0);

/// Marks two clients absent in every round.
ExperimentConfig dual_dropout(ExperimentConfig cfg, const std::string& a, const std::string& b);
/// bdd-dropout-dual without dropout, clients alternating 4x and 1x speed.
ExperimentConfig speed_skew_scenario();
/// Same data as overlap-60 with client i holding only partition i.
ExperimentConfig disjoint_scenario();
ExperimentConfig upgrade_resolution(ExperimentConfig cfg, const std::string& client, int resolution,
                                    int batch);
/// Clear-weather training, rain/snow as the shifted test set.
ExperimentConfig weather_crossdomain_scenario();
/// n_clients clients with `per_client` samples each.
ExperimentConfig scale_scenario(std::size_t n_clients, std::size_t per_client, std::size_t rounds);

}  // namespace fedsim
