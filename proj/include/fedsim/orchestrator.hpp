// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Federated run loops over a virtual clock.
//
// Synchronous rounds (FedAvg / FedProx): every present client trains from the
// current global model, the server takes the sample-weighted mean, and the
// clock advances by the slowest participant (barrier). Asynchronous runs
// (FedAsync): completion events are processed in (virtual time, client id)
// order and each one is mixed into the global model on arrival.
//
// All randomness is keyed by (master seed, purpose, client id, round), so a
// run is a pure function of its config and a checkpointed run resumes to the
// exact same log.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

enum class Strategy { kFedAvg, kFedProx, kFedAsync };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct DropoutRule {
  enum class Mode { kAlwaysOn, kAbsentRounds, kStochastic };

  Mode mode = Mode::kAlwaysOn;
  std::set<std::size_t> absent_rounds;  // 1-based
  double p = 0.0;  // leave probability after a present round
  double q = 0.0;  // rejoin probability after an absent round
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClientSpec {
  std::string id;
  std::vector<std::size_t> shards;  // plan rows this client holds
  int resolution = 640;
  int batch = 32;
  std::string architecture = "v8";
  DeviceSpec device;
  ScenarioMix scenario_mix;  // empty: use the plan's mix for each shard
  DropoutRule dropout;
};

struct EvalSetSpec {
  std::string name;
  /// Scenario plans: column selectors taken from the evaluation rows.
  std::vector<std::string> columns;
  /// Class plans: scenario mix for the generated held-out samples.
  ScenarioMix scenario_mix;
};

struct DataConfig {
  PartitionPlan plan;
  double scale = 1.0;
  /// Held-out size per plan row, relative to the row (class plans without an
  /// evaluation client).
  double holdout_ratio = 0.2;
  /// Scenario plans: column selectors used for training (all when empty).
  std::vector<std::string> train_columns;
  /// Scenario plans: column selectors of the primary evaluation set (defaults
  /// to train_columns).
  std::vector<std::string> eval_columns;
  std::vector<EvalSetSpec> extra_evals;
  /// Feature-noise multiplier per client resolution.
  std::map<int, double> resolution_noise{{320, 1.5}, {640, 1.0}, {960, 0.67}};
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string name = "experiment";
  Strategy strategy = Strategy::kFedAvg;
  std::size_t rounds = 10;
  TrainConfig train;
  SyntheticTask task = default_task();
  DataConfig data;
  std::vector<ClientSpec> clients;
  AsyncConfig async;
  /// Server applications in an async run; 0 means rounds x clients.
  std::size_t async_applications = 0;
  double aggregation_window_s = 0.0;
  std::uint64_t master_seed = 0;
  std::string calibration_file;  // empty: embedded calibration

  std::size_t async_budget() const {
    return async_applications ? async_applications : rounds * clients.size();
  }
  /// run_id used in every metrics record.
  std::string run_id() const;
  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

/// Dataset and cost bindings derived from a config.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const Calibration& calibration() const { return calibration_; }
  const LocalDataset& client_data(std::size_t client) const { return client_data_.at(client); }
  const LocalDataset& eval_set() const { return eval_set_; }
  const std::vector<std::pair<std::string, LocalDataset>>& extra_evals() const {
    return extra_evals_;
  }
  const CostEntry& cost(std::size_t client) const { return costs_.at(client); }
  bool oom(std::size_t client) const { return !memory_.at(client).feasible; }
  /// Client sample count relative to the largest client.
  double data_fraction(std::size_t client) const;
  double round_time(std::size_t client) const;
  /// Client indices sorted by id.
  const std::vector<std::size_t>& canonical_order() const { return order_; }
  std::size_t index_of(std::string_view id) const;

 private:
  LocalDataset shard_data(const PartitionPlan& plan, std::size_t shard, const ScenarioMix& mix,
                          double noise_factor, std::uint64_t stream, double ratio) const;

  ExperimentConfig cfg_;
  Calibration calibration_;
  PartitionPlan train_plan_;
  std::vector<LocalDataset> client_data_;
  LocalDataset eval_set_;
  std::vector<std::pair<std::string, LocalDataset>> extra_evals_;
  std::vector<CostEntry> costs_;
  std::vector<MemoryVerdict> memory_;
  std::vector<std::size_t> order_;
  std::size_t max_samples_ = 1;
};

/// Whether a client is present in a 1-based round. Stochastic rules start
/// present in round 1; a present client leaves with probability p, an absent
/// one rejoins with probability q, one seeded coin per client and round.
bool is_present(const DropoutRule& rule, std::string_view client_id, std::size_t round,
                std::uint64_t seed);

/// Ids of the clients present in `round`.
std::set<std::string> apply_dropout(const std::vector<ClientSpec>& clients, std::size_t round,
                                    std::uint64_t seed);

std::uint64_t client_key(std::string_view client_id);

struct InFlight {
  std::string client_id;
  double t_fetch = 0.0;
  double t_done = 0.0;
  std::int64_t base_version = 0;
  bool retry = false;  // absent client waiting to re-check participation
  ParamVector snapshot;

  bool operator==(const InFlight&) const = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct Checkpoint {
  int schema_version = 1;
  std::string config_digest;
  Strategy strategy = Strategy::kFedAvg;
  std::size_t round = 0;  // completed rounds
  std::int64_t version = 0;
  double clock_s = 0.0;
  ParamVector global;
  std::vector<double> eval_history;
  std::size_t log_records = 0;
  /// Local trainings completed per client; keys the next training stream.
  std::map<std::string, std::uint64_t> rng_cursors;
  // async only
  std::size_t applications = 0;
  std::vector<InFlight> in_flight;
  std::map<std::string, std::size_t> applications_per_client;
  std::set<std::string> oom_reported;

  bool operator==(const Checkpoint&) const = default;
};

/// FNV-1a 64 of the canonical config JSON, hex encoded.
std::string config_digest(const ExperimentConfig& cfg);

struct RunOptions {
  /// Stop after this many completed rounds (0: run to completion).
  std::size_t stop_after_round = 0;
  /// Call on_checkpoint every k completed rounds (0: never).
  std::size_t checkpoint_every = 0;
  std::function<void(const Checkpoint&)> on_checkpoint;
  const Checkpoint* resume = nullptr;
};

struct RunResult {
  ParamVector final_params;
  std::vector<double> eval_history;  // one accuracy per round
  double final_accuracy = 0.0;
  std::map<std::string, double> extra_accuracy;
  std::int64_t version = 0;
  double clock_s = 0.0;
  std::size_t rounds_completed = 0;
  bool completed = false;
  std::map<std::string, std::size_t> applications_per_client;
  std::size_t log_records = 0;
};

RunResult run_sync(const ExperimentConfig& cfg, MetricsSink& sink, const RunOptions& opts = {});
RunResult run_sync(const Workspace& ws, MetricsSink& sink, const RunOptions& opts = {});
RunResult run_async(const ExperimentConfig& cfg, MetricsSink& sink, const RunOptions& opts = {});
RunResult run_async(const Workspace& ws, MetricsSink& sink, const RunOptions& opts = {});
/// Dispatches on cfg.strategy.
RunResult run_experiment(const Workspace& ws, MetricsSink& sink, const RunOptions& opts = {});

/// Validates that `cp` belongs to `cfg` (digest and strategy); throws
/// ConfigError with a diagnostic otherwise.
void checkpoint_resume(const Checkpoint& cp, const ExperimentConfig& cfg);

}  // namespace fedsim
