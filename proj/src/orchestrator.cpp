// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "fedsim/config_io.hpp"
#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kDataStream = 0x64617461;      // "data"
constexpr std::uint64_t kHoldoutStream = 0x686f6c64;   // "hold"
constexpr std::uint64_t kExtraEvalStream = 0x65787472; // "extr"
constexpr std::uint64_t kTrainStream = 0x747261696e;   // "train"
constexpr std::uint64_t kDropoutStream = 0x64726f70;   // "drop"
constexpr std::uint64_t kPowerStream = 0x706f776572;   // "power"
constexpr std::uint64_t kIdleStream = 0x69646c65;      // "idle"

std::vector<std::size_t> even_class_split(std::size_t count, std::size_t n_classes) {
  const std::vector<double> fr(n_classes, 1.0 / static_cast<double>(n_classes));
  return largest_remainder(count, fr);
}

std::vector<std::size_t> scaled_row(const std::vector<std::size_t>& row, double ratio) {
  std::vector<std::size_t> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    out[c] = static_cast<std::size_t>(std::llround(static_cast<double>(row[c]) * ratio));
  }
  return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kFedAvg: return "fedavg";
    case Strategy::kFedProx: return "fedprox";
    case Strategy::kFedAsync: return "fedasync";
  }
  return "fedavg";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "fedavg") return Strategy::kFedAvg;
  if (name == "fedprox") return Strategy::kFedProx;
  if (name == "fedasync") return Strategy::kFedAsync;
  throw ConfigError("strategy: unknown value \"" + std::string(name) +
                    "\" (expected fedavg, fedprox or fedasync)");
}

void DropoutRule::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("dropout.p: must lie in [0, 1]");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("dropout.q: must lie in [0, 1]");
  for (auto r : absent_rounds) {
    if (r < 1) throw ConfigError("dropout.absent_rounds: rounds are 1-based");
  }
}

std::string ExperimentConfig::run_id() const {
  return name + "-" + std::string(to_string(strategy)) + "-s" + std::to_string(master_seed);
}

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw ConfigError("schema_version: only 1 is supported");
  if (rounds < 1) throw ConfigError("rounds: must be >= 1");
  train.validate();
  task.validate();
  async.validate();
  data.plan.validate();
  if (!(data.holdout_ratio > 0.0)) throw ConfigError("data.holdout_ratio: must be > 0");
  if (!(aggregation_window_s >= 0.0)) throw ConfigError("aggregation_window_s: must be >= 0");
  if (strategy == Strategy::kFedAvg && train.prox_mu != 0.0) {
    throw ConfigError("train.prox_mu: must be 0 for fedavg (use strategy fedprox)");
  }
  if (strategy == Strategy::kFedAsync && train.prox_mu != 0.0) {
    throw ConfigError("train.prox_mu: must be 0 for fedasync");
  }
  if (data.plan.kind == PlanKind::kClass && data.plan.n_columns() != task.n_classes) {
    throw ConfigError("data.plan: has " + std::to_string(data.plan.n_columns()) +
                      " classes, task.n_classes is " + std::to_string(task.n_classes));
  }
  if (data.plan.kind == PlanKind::kScenario) {
    for (const auto& col : data.plan.class_names) {
      if (!task.scenario_shifts.contains(col)) {
        throw ConfigError("task.scenario_shifts: missing entry for plan column \"" + col + "\"");
      }
    }
  }
  if (clients.empty()) throw ConfigError("clients: at least one client required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    const auto where = "clients[" + std::to_string(i) + "]";
    if (c.id.empty()) throw ConfigError(where + ".id: must not be empty");
    if (!ids.insert(c.id).second) throw ConfigError(where + ".id: duplicate \"" + c.id + "\"");
    if (c.shards.empty()) throw ConfigError(where + ".shards: at least one plan row required");
    for (auto s : c.shards) {
      if (s >= data.plan.n_clients()) throw ConfigError(where + ".shards: row out of range");
      if (data.plan.eval_client && s == *data.plan.eval_client) {
        throw ConfigError(where + ".shards: row " + std::to_string(s) +
                          " is reserved for evaluation");
      }
    }
    if (c.batch < 1) throw ConfigError(where + ".batch: must be >= 1");
    if (!data.resolution_noise.contains(c.resolution)) {
      throw ConfigError(where + ".resolution: no noise factor for " +
                        std::to_string(c.resolution));
    }
    c.device.validate();
    c.dropout.validate();
    double s = 0.0;
    for (const auto& [tag, f] : c.scenario_mix) {
      if (!task.scenario_shifts.contains(tag)) {
        throw ConfigError(where + ".scenario_mix: unknown scenario \"" + tag + "\"");
      }
      s += f;
    }
    if (!c.scenario_mix.empty() && std::abs(s - 1.0) > 1e-9) {
      throw ConfigError(where + ".scenario_mix: fractions must sum to 1");
    }
  }
}

std::uint64_t client_key(std::string_view client_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : client_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_present(const DropoutRule& rule, std::string_view client_id, std::size_t round,
                std::uint64_t seed) {
  switch (rule.mode) {
    case DropoutRule::Mode::kAlwaysOn:
      return true;
    case DropoutRule::Mode::kAbsentRounds:
      return !rule.absent_rounds.contains(round);
    case DropoutRule::Mode::kStochastic: {
      bool present = true;
      const auto ck = client_key(client_id);
      for (std::size_t r = 2; r <= round; ++r) {
        CounterRng coin(make_key({seed, rule.seed, kDropoutStream, ck, r}));
        const double u = coin.uniform();
        present = present ? !(u < rule.p) : (u < rule.q);
      }
      return present;
    }
  }
  return true;
}

std::set<std::string> apply_dropout(const std::vector<ClientSpec>& clients, std::size_t round,
                                    std::uint64_t seed) {
  std::set<std::string> out;
  for (const auto& c : clients) {
    if (is_present(c.dropout, c.id, round, seed)) out.insert(c.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  calibration_ = cfg_.calibration_file.empty() ? default_calibration()
                                               : load_calibration(cfg_.calibration_file);
  PartitionPlan scaled = scale_plan(cfg_.data.plan, cfg_.data.scale);
  const bool scenario_plan = scaled.kind == PlanKind::kScenario;
  train_plan_ = scenario_plan ? filter_columns(scaled, cfg_.data.train_columns) : scaled;

  const auto n = cfg_.clients.size();
  client_data_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = cfg_.clients[i];
    const double noise = cfg_.data.resolution_noise.at(spec.resolution);
    LocalDataset ds;
    ds.client_id = spec.id;
    ds.n_features = cfg_.task.n_features;
    for (auto shard : spec.shards) {
      ds.append(shard_data(train_plan_, shard, spec.scenario_mix, noise, kDataStream, 1.0));
    }
    if (ds.empty()) throw ConfigError("client " + spec.id + " has no training samples");
    max_samples_ = std::max(max_samples_, ds.size());
    client_data_[i] = std::move(ds);
  }

  // Evaluation sets are always generated at the reference noise level.
  const double ratio = cfg_.data.holdout_ratio;
  if (scaled.eval_client) {
    const auto row = *scaled.eval_client;
    const auto& cols = cfg_.data.eval_columns.empty() ? cfg_.data.train_columns
                                                      : cfg_.data.eval_columns;
    eval_set_ = shard_data(filter_columns(scaled, cols), row, {}, 1.0, kHoldoutStream, 1.0);
    for (std::size_t e = 0; e < cfg_.data.extra_evals.size(); ++e) {
      const auto& spec = cfg_.data.extra_evals[e];
      extra_evals_.emplace_back(spec.name,
                                shard_data(filter_columns(scaled, spec.columns), row, {}, 1.0,
                                           make_key({kExtraEvalStream, e}), 1.0));
    }
  } else {
    eval_set_.n_features = cfg_.task.n_features;
    for (std::size_t r = 0; r < scaled.n_clients(); ++r) {
      eval_set_.append(shard_data(train_plan_, r, {}, 1.0, kHoldoutStream, ratio));
    }
    for (std::size_t e = 0; e < cfg_.data.extra_evals.size(); ++e) {
      const auto& spec = cfg_.data.extra_evals[e];
      LocalDataset ds;
      ds.n_features = cfg_.task.n_features;
      for (std::size_t r = 0; r < scaled.n_clients(); ++r) {
        ds.append(shard_data(train_plan_, r, spec.scenario_mix, 1.0,
                             make_key({kExtraEvalStream, e}), ratio));
      }
      extra_evals_.emplace_back(spec.name, std::move(ds));
    }
  }
  eval_set_.client_id = "eval";
  if (eval_set_.empty()) throw ConfigError("evaluation set is empty");
  for (const auto& [name, ds] : extra_evals_) {
    if (ds.empty()) throw ConfigError("evaluation set \"" + name + "\" is empty");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = cfg_.clients[i];
    costs_.push_back(lookup(calibration_.profile(spec.architecture), spec.resolution, spec.batch));
    memory_.push_back(check_memory(costs_.back(), spec.device));
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return cfg_.clients[a].id < cfg_.clients[b].id;
  });
}

LocalDataset Workspace::shard_data(const PartitionPlan& plan, std::size_t shard,
                                   const ScenarioMix& mix_override, double noise_factor,
                                   std::uint64_t stream, double ratio) const {
  SyntheticTask task = cfg_.task;
  task.noise_sigma *= noise_factor;
  const auto row = ratio == 1.0 ? plan.counts.at(shard) : scaled_row(plan.counts.at(shard), ratio);
  const std::uint64_t seed = cfg_.master_seed;

  LocalDataset out;
  out.client_id = plan.client_ids.at(shard);
  out.n_features = task.n_features;
  if (plan.kind == PlanKind::kClass) {
    ScenarioMix mix = mix_override;
    if (mix.empty()) {
      auto it = plan.scenario_mix.find(plan.client_ids[shard]);
      if (it != plan.scenario_mix.end()) mix = it->second;
    }
    out = generate_dataset(task, row, mix, make_key({seed, stream, shard}), out.client_id);
  } else {
    for (std::size_t c = 0; c < plan.n_columns(); ++c) {
      if (row[c] == 0) continue;
      const auto classes = even_class_split(row[c], task.n_classes);
      const ScenarioMix mix{{plan.class_names[c], 1.0}};
      out.append(generate_dataset(task, classes, mix,
                                  make_key({seed, stream, shard, client_key(plan.class_names[c])}),
                                  out.client_id));
    }
  }
  return out;
}

double Workspace::data_fraction(std::size_t client) const {
  return static_cast<double>(client_data_.at(client).size()) / static_cast<double>(max_samples_);
}

double Workspace::round_time(std::size_t client) const {
  return client_round_time(costs_.at(client), data_fraction(client), cfg_.clients.at(client).device,
                           to_string(cfg_.strategy), calibration_);
}

std::size_t Workspace::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < cfg_.clients.size(); ++i) {
    if (cfg_.clients[i].id == id) return i;
  }
  throw SimulationError("unknown client \"" + std::string(id) + "\"");
}

// ---------------------------------------------------------------------------
// Shared run plumbing

namespace {

struct RunState {
  ParamVector global;
  std::int64_t version = 0;
  std::size_t round = 0;
  double clock = 0.0;
  std::vector<double> eval_history;
  std::map<std::string, std::uint64_t> cursors;
  std::size_t applications = 0;
  std::vector<InFlight> in_flight;
  std::map<std::string, std::size_t> applications_per_client;
  std::set<std::string> oom_reported;
};

class Emitter {
 public:
  Emitter(const Workspace& ws, MetricsSink& sink, std::size_t base)
      : ws_(ws), sink_(sink), run_id_(ws.config().run_id()), base_(base) {}

  std::size_t count() const { return base_ + sink_.emitted() - start_; }

  MetricsRecord make(std::size_t round, EventKind kind, double t0, double t1) const {
    MetricsRecord r;
    r.run_id = run_id_;
    r.round = round;
    r.event = kind;
    r.t_start_s = t0;
    r.t_end_s = t1;
    return r;
  }

  void emit(const MetricsRecord& r) { sink_.emit(r); }

  void train_window(std::size_t round, std::size_t client, double t0, double t1,
                    const LocalResult& res, std::uint64_t power_key) {
    const auto& entry = ws_.cost(client);
    const auto sample =
        sample_power_and_util(entry, Phase::kTraining, power_key, ws_.calibration());
    auto r = make(round, EventKind::kTrainWindow, t0, t1);
    r.client_id = ws_.config().clients[client].id;
    r.mem_mib = entry.peak_mem_mib;
    r.power_w = sample.watts;
    r.util_pct = sample.util_pct;
    r.energy_j = energy_joules(sample.watts, t1 - t0);
    r.n_samples = res.n_samples;
    r.loss = res.train_loss;
    r.estimated = entry.time_estimated || entry.memory_estimated || sample.estimated;
    emit(r);
  }

  void idle_aggregate(std::size_t round, double t0, double t1, std::size_t n_samples,
                      std::uint64_t key, std::optional<std::string> client,
                      std::optional<std::uint64_t> staleness) {
    // Any client's entry works for idle sampling; only the calibration's idle
    // block is read.
    const auto sample = sample_power_and_util(ws_.cost(0), Phase::kAggregationIdle, key,
                                              ws_.calibration());
    auto r = make(round, EventKind::kAggregate, t0, t1);
    r.client_id = std::move(client);
    r.power_w = sample.watts;
    r.util_pct = sample.util_pct;
    r.energy_j = energy_joules(sample.watts, t1 - t0);
    r.n_samples = n_samples;
    r.staleness = staleness;
    r.estimated = sample.estimated;
    emit(r);
  }

  void simple(std::size_t round, EventKind kind, double t, std::size_t client) {
    auto r = make(round, kind, t, t);
    r.client_id = ws_.config().clients[client].id;
    if (kind == EventKind::kOom) r.mem_mib = ws_.cost(client).peak_mem_mib;
    emit(r);
  }

  double eval(std::size_t round, double t, const ParamVector& w) {
    const auto& task = ws_.config().task;
    const double acc = evaluate(task, w, ws_.eval_set());
    auto r = make(round, EventKind::kEval, t, t);
    r.n_samples = ws_.eval_set().size();
    r.loss = dataset_loss(task, w, ws_.eval_set());
    r.accuracy = acc;
    emit(r);
    return acc;
  }

  void run_end(std::size_t round, double t, double acc) {
    auto r = make(round, EventKind::kRunEnd, t, t);
    r.accuracy = acc;
    emit(r);
  }

 private:
  const Workspace& ws_;
  MetricsSink& sink_;
  std::string run_id_;
  std::size_t base_;
  std::size_t start_ = sink_.emitted();
};

RunState initial_state(const Workspace& ws, const RunOptions& opts) {
  RunState st;
  if (opts.resume) {
    const auto& cp = *opts.resume;
    checkpoint_resume(cp, ws.config());
    if (cp.global.size() != ws.config().task.param_count()) {
      throw ConfigError("checkpoint: parameter vector has the wrong length");
    }
    st.global = cp.global;
    st.version = cp.version;
    st.round = cp.round;
    st.clock = cp.clock_s;
    st.eval_history = cp.eval_history;
    st.cursors = cp.rng_cursors;
    st.applications = cp.applications;
    st.in_flight = cp.in_flight;
    st.applications_per_client = cp.applications_per_client;
    st.oom_reported = cp.oom_reported;
  } else {
    st.global = ws.config().task.zero_params();
    for (const auto& c : ws.config().clients) st.cursors[c.id] = 0;
  }
  return st;
}

Checkpoint snapshot(const Workspace& ws, const RunState& st, std::size_t log_records) {
  Checkpoint cp;
  cp.config_digest = config_digest(ws.config());
  cp.strategy = ws.config().strategy;
  cp.round = st.round;
  cp.version = st.version;
  cp.clock_s = st.clock;
  cp.global = st.global;
  cp.eval_history = st.eval_history;
  cp.log_records = log_records;
  cp.rng_cursors = st.cursors;
  cp.applications = st.applications;
  cp.in_flight = st.in_flight;
  cp.applications_per_client = st.applications_per_client;
  cp.oom_reported = st.oom_reported;
  return cp;
}

void diagnose_permanent_absence(const Workspace& ws) {
  const auto& cfg = ws.config();
  std::ostringstream why;
  bool any_usable = false;
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    const auto& c = cfg.clients[i];
    if (ws.oom(i)) {
      why << "\n  " << c.id << ": needs " << ws.cost(i).peak_mem_mib << " MiB, device has "
          << c.device.mem_capacity_mib << " MiB (OOM)";
      continue;
    }
    bool always_absent = c.dropout.mode == DropoutRule::Mode::kAbsentRounds;
    for (std::size_t r = 1; always_absent && r <= cfg.rounds; ++r) {
      always_absent = c.dropout.absent_rounds.contains(r);
    }
    if (always_absent) {
      why << "\n  " << c.id << ": absent in every round";
      continue;
    }
    any_usable = true;
  }
  if (!any_usable) {
    throw SimulationError("no client can ever participate:" + why.str());
  }
}

RunResult finish(const Workspace& ws, const RunState& st, Emitter& em, bool completed) {
  RunResult res;
  res.final_params = st.global;
  res.eval_history = st.eval_history;
  res.final_accuracy = st.eval_history.empty() ? evaluate(ws.config().task, st.global, ws.eval_set())
                                               : st.eval_history.back();
  res.version = st.version;
  res.clock_s = st.clock;
  res.rounds_completed = st.round;
  res.completed = completed;
  res.applications_per_client = st.applications_per_client;
  if (completed) {
    for (const auto& [name, ds] : ws.extra_evals()) {
      res.extra_accuracy[name] = evaluate(ws.config().task, st.global, ds);
    }
    em.run_end(st.round, st.clock, res.final_accuracy);
  }
  res.log_records = em.count();
  return res;
}

TrainConfig client_train_config(const Workspace& ws, std::size_t client, std::uint64_t key) {
  TrainConfig tc = ws.config().train;
  tc.batch_size = static_cast<std::size_t>(ws.config().clients[client].batch);
  tc.seed = key;
  return tc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synchronous rounds

RunResult run_sync(const ExperimentConfig& cfg, MetricsSink& sink, const RunOptions& opts) {
  const Workspace ws(cfg);
  return run_sync(ws, sink, opts);
}

RunResult run_sync(const Workspace& ws, MetricsSink& sink, const RunOptions& opts) {
  const auto& cfg = ws.config();
  if (cfg.strategy == Strategy::kFedAsync) {
    throw ConfigError("run_sync: strategy must be fedavg or fedprox");
  }
  diagnose_permanent_absence(ws);
  RunState st = initial_state(ws, opts);
  Emitter em(ws, sink, opts.resume ? opts.resume->log_records : 0);
  const auto seed = cfg.master_seed;

  while (st.round < cfg.rounds) {
    const std::size_t r = st.round + 1;
    const double t0 = st.clock;
    std::vector<ClientUpdate> updates;
    double barrier = 0.0;
    for (auto i : ws.canonical_order()) {
      const auto& spec = cfg.clients[i];
      if (!is_present(spec.dropout, spec.id, r, seed)) {
        em.simple(r, EventKind::kDropout, t0, i);
        continue;
      }
      if (ws.oom(i)) {
        em.simple(r, EventKind::kOom, t0, i);
        continue;
      }
      const auto ck = client_key(spec.id);
      const auto tc = client_train_config(ws, i, make_key({seed, cfg.train.seed, kTrainStream, ck, r}));
      auto res = local_train(cfg.task, st.global, ws.client_data(i), tc);
      ++st.cursors[spec.id];
      const double dur = ws.round_time(i);
      barrier = std::max(barrier, dur);
      em.train_window(r, i, t0, t0 + dur, res, make_key({seed, kPowerStream, ck, r}));
      updates.push_back({spec.id, std::move(res.params), res.n_samples, st.version});
    }

    if (updates.empty()) {
      auto rec = em.make(r, EventKind::kStalled, t0, t0);
      em.emit(rec);
    } else {
      st.global = fedavg_aggregate(updates);
      ++st.version;
      std::size_t total = 0;
      for (const auto& u : updates) total += u.n_samples;
      const double ta = t0 + barrier;
      st.clock = ta + cfg.aggregation_window_s;
      em.idle_aggregate(r, ta, st.clock, total, make_key({seed, kIdleStream, r}), std::nullopt,
                        std::nullopt);
    }
    st.eval_history.push_back(em.eval(r, st.clock, st.global));
    st.round = r;

    if (opts.checkpoint_every && opts.on_checkpoint && r % opts.checkpoint_every == 0 &&
        r < cfg.rounds) {
      opts.on_checkpoint(snapshot(ws, st, em.count()));
    }
    if (opts.stop_after_round && r >= opts.stop_after_round && r < cfg.rounds) {
      if (opts.on_checkpoint) opts.on_checkpoint(snapshot(ws, st, em.count()));
      return finish(ws, st, em, false);
    }
  }
  return finish(ws, st, em, true);
}

// ---------------------------------------------------------------------------
// Asynchronous event loop

RunResult run_async(const ExperimentConfig& cfg, MetricsSink& sink, const RunOptions& opts) {
  const Workspace ws(cfg);
  return run_async(ws, sink, opts);
}

RunResult run_async(const Workspace& ws, MetricsSink& sink, const RunOptions& opts) {
  const auto& cfg = ws.config();
  if (cfg.strategy != Strategy::kFedAsync) {
    throw ConfigError("run_async: strategy must be fedasync");
  }
  diagnose_permanent_absence(ws);
  RunState st = initial_state(ws, opts);
  Emitter em(ws, sink, opts.resume ? opts.resume->log_records : 0);
  const auto seed = cfg.master_seed;
  const std::size_t n_clients = cfg.clients.size();
  const std::size_t budget = cfg.async_budget();
  const std::size_t n_rounds = (budget + n_clients - 1) / n_clients;
  auto round_of = [&](std::size_t applications) { return applications / n_clients + 1; };

  auto later = [](const InFlight& a, const InFlight& b) {
    return std::tie(a.t_done, a.client_id) > std::tie(b.t_done, b.client_id);
  };
  std::priority_queue<InFlight, std::vector<InFlight>, decltype(later)> queue(later);

  // Fetch the current global model, or wait one round-time if absent.
  auto dispatch = [&](std::size_t i, double now) {
    const auto& spec = cfg.clients[i];
    const double dur = ws.round_time(i);
    InFlight f;
    f.client_id = spec.id;
    f.t_fetch = now;
    f.t_done = now + dur;
    if (is_present(spec.dropout, spec.id, round_of(st.applications), seed)) {
      f.base_version = st.version;
      f.snapshot = st.global;
    } else {
      em.simple(round_of(st.applications), EventKind::kDropout, now, i);
      f.retry = true;
    }
    queue.push(std::move(f));
  };

  if (opts.resume) {
    for (auto& f : st.in_flight) queue.push(f);
  } else {
    for (auto i : ws.canonical_order()) {
      if (ws.oom(i)) {
        em.simple(1, EventKind::kOom, 0.0, i);
        st.oom_reported.insert(cfg.clients[i].id);
        continue;
      }
      dispatch(i, 0.0);
    }
  }

  std::size_t idle_events = 0;
  while (st.applications < budget) {
    if (queue.empty()) throw SimulationError("async run has no clients left to schedule");
    InFlight ev = queue.top();
    queue.pop();
    const auto i = ws.index_of(ev.client_id);
    st.clock = ev.t_done;
    if (ev.retry) {
      if (++idle_events > 4 * n_clients * (n_rounds + 1)) {
        throw SimulationError("async run stalled: every client stays absent in round " +
                              std::to_string(round_of(st.applications)));
      }
      dispatch(i, st.clock);
      continue;
    }
    idle_events = 0;

    const auto& spec = cfg.clients[i];
    const auto ck = client_key(spec.id);
    const auto cursor = st.cursors[spec.id]++;
    const auto tc = client_train_config(ws, i, make_key({seed, cfg.train.seed, kTrainStream, ck, cursor}));
    auto res = local_train(cfg.task, ev.snapshot, ws.client_data(i), tc);
    const std::size_t r = round_of(st.applications);
    em.train_window(r, i, ev.t_fetch, ev.t_done, res, make_key({seed, kPowerStream, ck, cursor}));

    ClientUpdate upd{spec.id, std::move(res.params), res.n_samples, ev.base_version};
    auto step = fedasync_update(st.global, st.version, upd, cfg.async);
    st.global = std::move(step.params);
    st.version = step.version;
    ++st.applications;
    ++st.applications_per_client[spec.id];
    em.idle_aggregate(r, st.clock, st.clock, upd.n_samples,
                      make_key({seed, kIdleStream, st.applications}), spec.id, step.staleness);

    const bool round_done = st.applications % n_clients == 0 || st.applications == budget;
    if (round_done) {
      st.eval_history.push_back(em.eval(r, st.clock, st.global));
      st.round = r;
    }
    if (st.applications < budget) dispatch(i, st.clock);

    if (round_done && st.applications < budget) {
      const bool want_cp = opts.checkpoint_every && r % opts.checkpoint_every == 0;
      const bool stop = opts.stop_after_round && r >= opts.stop_after_round;
      if ((want_cp || stop) && opts.on_checkpoint) {
        auto copy = queue;
        st.in_flight.clear();
        while (!copy.empty()) {
          st.in_flight.push_back(copy.top());
          copy.pop();
        }
        opts.on_checkpoint(snapshot(ws, st, em.count()));
        st.in_flight.clear();
      }
      if (stop) return finish(ws, st, em, false);
    }
  }
  return finish(ws, st, em, true);
}

RunResult run_experiment(const Workspace& ws, MetricsSink& sink, const RunOptions& opts) {
  return ws.config().strategy == Strategy::kFedAsync ? run_async(ws, sink, opts)
                                                     : run_sync(ws, sink, opts);
}

void checkpoint_resume(const Checkpoint& cp, const ExperimentConfig& cfg) {
  if (cp.schema_version != 1) throw ConfigError("checkpoint: unsupported schema_version");
  const auto digest = config_digest(cfg);
  if (cp.config_digest != digest) {
    throw ConfigError("checkpoint: config digest " + cp.config_digest +
                      " does not match the supplied config (" + digest +
                      "); the experiment definition changed since the checkpoint was taken");
  }
  if (cp.strategy != cfg.strategy) throw ConfigError("checkpoint: strategy mismatch");
  if (cp.round > cfg.rounds) throw ConfigError("checkpoint: round beyond configured rounds");
}

}  // namespace fedsim
