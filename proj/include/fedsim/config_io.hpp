// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON documents: experiment configs, partition plans, overlap plans and
// checkpoints. Every loader rejects unknown keys and reports the offending
// field by its dotted path.

#pragma once

#include <string>
#include <string_view>

#include "fedsim/orchestrator.hpp"
#include "fedsim/partition.hpp"
#include "json.hpp"

namespace fedsim {

using Json = nlohmann::ordered_json;

Json plan_to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const Json& j, std::string_view where = "plan");

Json overlap_to_json(const OverlapPlan& plan);
OverlapPlan overlap_from_json(const Json& j);

/// Canonical form: every default made explicit, clients expanded, plan
/// inlined. save_config(load_config(x)) is a fixed point.
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
std::string dump_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Parameters and clocks are stored as C99 hex-float strings, which
/// round-trip exactly.
Json checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string to_hexfloat(double v);
double from_hexfloat(std::string_view s);

/// Reads a whole file; throws ConfigError when it cannot be opened.
std::string read_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace fedsim
