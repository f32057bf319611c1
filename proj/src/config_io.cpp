// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/config_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

std::string join(std::string_view where, std::string_view key) {
  return std::string(where) + "." + std::string(key);
}

void check_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(join(where, key) + ": unknown field");
  }
}

const Json* field(const Json& j, std::string_view key) {
  auto it = j.find(std::string(key));
  return it == j.end() ? nullptr : &*it;
}

double get_double(const Json& j, std::string_view where) {
  if (!j.is_number()) throw ConfigError(std::string(where) + ": expected a number");
  return j.get<double>();
}

std::size_t get_size(const Json& j, std::string_view where) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw ConfigError(std::string(where) + ": expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

std::uint64_t get_u64(const Json& j, std::string_view where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ConfigError(std::string(where) + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

int get_int(const Json& j, std::string_view where) {
  if (!j.is_number_integer()) throw ConfigError(std::string(where) + ": expected an integer");
  return j.get<int>();
}

std::string get_string(const Json& j, std::string_view where) {
  if (!j.is_string()) throw ConfigError(std::string(where) + ": expected a string");
  return j.get<std::string>();
}

bool get_bool(const Json& j, std::string_view where) {
  if (!j.is_boolean()) throw ConfigError(std::string(where) + ": expected true or false");
  return j.get<bool>();
}

template <typename T, typename F>
std::vector<T> get_array(const Json& j, std::string_view where, F&& elem) {
  if (!j.is_array()) throw ConfigError(std::string(where) + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(elem(j[i], std::string(where) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<double> get_doubles(const Json& j, std::string_view where) {
  return get_array<double>(j, where, [](const Json& v, const std::string& w) { return get_double(v, w); });
}

std::vector<std::size_t> get_sizes(const Json& j, std::string_view where) {
  return get_array<std::size_t>(j, where, [](const Json& v, const std::string& w) { return get_size(v, w); });
}

std::vector<std::string> get_strings(const Json& j, std::string_view where) {
  return get_array<std::string>(j, where, [](const Json& v, const std::string& w) { return get_string(v, w); });
}

ScenarioMix get_mix(const Json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  ScenarioMix mix;
  double sum = 0.0;
  for (const auto& [tag, v] : j.items()) {
    mix[tag] = get_double(v, join(where, tag));
    if (mix[tag] < 0.0) throw ConfigError(join(where, tag) + ": must be >= 0");
    sum += mix[tag];
  }
  if (!mix.empty() && std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(std::string(where) + ": fractions sum to " + std::to_string(sum) +
                      ", must be 1 within 1e-9");
  }
  return mix;
}

Json mix_json(const ScenarioMix& mix) {
  Json j = Json::object();
  for (const auto& [k, v] : mix) j[k] = v;
  return j;
}

// Runs a validator and prefixes its message with the config path.
template <typename F>
void with_path(std::string_view where, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

Json task_to_json(const SyntheticTask& t) {
  Json j;
  j["n_classes"] = t.n_classes;
  j["n_features"] = t.n_features;
  j["noise_sigma"] = t.noise_sigma;
  j["class_means"] = t.class_means;
  Json shifts = Json::object();
  for (const auto& [k, v] : t.scenario_shifts) shifts[k] = v;
  j["scenario_shifts"] = shifts;
  return j;
}

SyntheticTask task_from_json(const Json& j) {
  check_keys(j, "task",
             {"n_classes", "n_features", "noise_sigma", "class_means", "class_means_seed",
              "scenario_shifts"});
  SyntheticTask t = default_task();
  if (auto* v = field(j, "n_classes")) t.n_classes = get_size(*v, "task.n_classes");
  if (auto* v = field(j, "n_features")) t.n_features = get_size(*v, "task.n_features");
  if (auto* v = field(j, "noise_sigma")) t.noise_sigma = get_double(*v, "task.noise_sigma");
  if (j.contains("class_means") && j.contains("class_means_seed")) {
    throw ConfigError("task.class_means_seed: give either class_means or class_means_seed");
  }
  if (auto* v = field(j, "class_means")) {
    t.class_means = get_array<std::vector<double>>(
        *v, "task.class_means", [](const Json& row, const std::string& w) { return get_doubles(row, w); });
  } else {
    std::uint64_t seed = kDefaultMeansSeed;
    if (auto* s = field(j, "class_means_seed")) seed = get_u64(*s, "task.class_means_seed");
    t.class_means = seeded_class_means(t.n_classes, t.n_features, seed);
  }
  t.scenario_shifts.clear();
  if (auto* v = field(j, "scenario_shifts")) {
    if (!v->is_object()) throw ConfigError("task.scenario_shifts: expected an object");
    for (const auto& [tag, vec] : v->items()) {
      t.scenario_shifts[tag] = get_doubles(vec, "task.scenario_shifts." + tag);
    }
  }
  if (!t.scenario_shifts.contains(kReferenceScenario)) {
    t.scenario_shifts[kReferenceScenario] = std::vector<double>(t.n_features, 0.0);
  }
  return t;
}

Json dropout_to_json(const DropoutRule& d) {
  Json j;
  switch (d.mode) {
    case DropoutRule::Mode::kAlwaysOn:
      j["mode"] = "always_on";
      break;
    case DropoutRule::Mode::kAbsentRounds:
      j["mode"] = "absent_rounds";
      j["rounds"] = std::vector<std::size_t>(d.absent_rounds.begin(), d.absent_rounds.end());
      break;
    case DropoutRule::Mode::kStochastic:
      j["mode"] = "stochastic";
      j["p"] = d.p;
      j["q"] = d.q;
      j["seed"] = d.seed;
      break;
  }
  return j;
}

DropoutRule dropout_from_json(const Json& j, const std::string& where) {
  check_keys(j, where, {"mode", "rounds", "p", "q", "seed"});
  DropoutRule d;
  const auto mode = j.contains("mode") ? get_string(j["mode"], where + ".mode") : "always_on";
  if (mode == "always_on") {
    d.mode = DropoutRule::Mode::kAlwaysOn;
  } else if (mode == "absent_rounds") {
    d.mode = DropoutRule::Mode::kAbsentRounds;
  } else if (mode == "stochastic") {
    d.mode = DropoutRule::Mode::kStochastic;
  } else {
    throw ConfigError(where + ".mode: expected always_on, absent_rounds or stochastic");
  }
  if (auto* v = field(j, "rounds")) {
    for (auto r : get_sizes(*v, where + ".rounds")) d.absent_rounds.insert(r);
  }
  if (auto* v = field(j, "p")) d.p = get_double(*v, where + ".p");
  if (auto* v = field(j, "q")) d.q = get_double(*v, where + ".q");
  if (auto* v = field(j, "seed")) d.seed = get_u64(*v, where + ".seed");
  with_path(where, [&] { d.validate(); });
  return d;
}

Json client_to_json(const ClientSpec& c) {
  Json j;
  j["id"] = c.id;
  j["shards"] = c.shards;
  j["resolution"] = c.resolution;
  j["batch"] = c.batch;
  j["architecture"] = c.architecture;
  j["device"] = {{"mem_capacity_mib", c.device.mem_capacity_mib},
                 {"speed_factor", c.device.speed_factor}};
  j["scenario_mix"] = mix_json(c.scenario_mix);
  j["dropout"] = dropout_to_json(c.dropout);
  return j;
}

void client_fields(ClientSpec& c, const Json& j, const std::string& where, bool allow_identity) {
  if (allow_identity) {
    check_keys(j, where,
               {"id", "shards", "resolution", "batch", "architecture", "device", "scenario_mix",
                "dropout"});
    if (auto* v = field(j, "id")) c.id = get_string(*v, where + ".id");
    if (auto* v = field(j, "shards")) c.shards = get_sizes(*v, where + ".shards");
  } else {
    check_keys(j, where, {"resolution", "batch", "architecture", "device", "scenario_mix", "dropout"});
  }
  if (auto* v = field(j, "resolution")) c.resolution = get_int(*v, where + ".resolution");
  if (auto* v = field(j, "batch")) c.batch = get_int(*v, where + ".batch");
  if (auto* v = field(j, "architecture")) c.architecture = get_string(*v, where + ".architecture");
  if (auto* v = field(j, "device")) {
    check_keys(*v, where + ".device", {"mem_capacity_mib", "speed_factor"});
    if (auto* m = field(*v, "mem_capacity_mib")) {
      c.device.mem_capacity_mib = get_double(*m, where + ".device.mem_capacity_mib");
    }
    if (auto* s = field(*v, "speed_factor")) {
      c.device.speed_factor = get_double(*s, where + ".device.speed_factor");
    }
  }
  if (auto* v = field(j, "scenario_mix")) c.scenario_mix = get_mix(*v, where + ".scenario_mix");
  if (auto* v = field(j, "dropout")) c.dropout = dropout_from_json(*v, where + ".dropout");
}

PartitionPlan plan_spec_from_json(const Json& j) {
  const std::string where = "data.plan";
  if (j.is_string()) {
    PartitionPlan p;
    with_path(where, [&] { p = builtin_plan(j.get<std::string>()); });
    return p;
  }
  if (!j.is_object()) throw ConfigError(where + ": expected a plan name or object");
  if (j.contains("builtin")) {
    check_keys(j, where, {"builtin", "totals"});
    const auto name = get_string(j["builtin"], where + ".builtin");
    PartitionPlan p;
    if (j.contains("totals")) {
      if (name != "nuscenes-frac-4") {
        throw ConfigError(where + ".totals: only nuscenes-frac-4 takes custom totals");
      }
      const auto totals = get_sizes(j["totals"], where + ".totals");
      with_path(where + ".totals", [&] { p = nuscenes_plan(totals); });
    } else {
      with_path(where + ".builtin", [&] { p = builtin_plan(name); });
    }
    return p;
  }
  if (j.contains("fraction_split")) {
    check_keys(j, where, {"fraction_split"});
    const auto& fs = j["fraction_split"];
    const std::string w = where + ".fraction_split";
    check_keys(fs, w, {"class_names", "totals", "fractions"});
    if (!fs.contains("class_names") || !fs.contains("totals") || !fs.contains("fractions")) {
      throw ConfigError(w + ": class_names, totals and fractions are required");
    }
    const auto names = get_strings(fs["class_names"], w + ".class_names");
    const auto totals = get_sizes(fs["totals"], w + ".totals");
    const auto fractions = get_doubles(fs["fractions"], w + ".fractions");
    check_fractions(fractions, w + ".fractions");
    return fraction_split(names, totals, fractions);
  }
  return plan_from_json(j, where);
}

}  // namespace

// ---------------------------------------------------------------------------
// Plans

Json plan_to_json(const PartitionPlan& p) {
  Json j;
  j["schema_version"] = 1;
  j["name"] = p.name;
  j["kind"] = p.kind == PlanKind::kClass ? "class" : "scenario";
  j["class_names"] = p.class_names;
  j["totals"] = p.totals;
  j["client_ids"] = p.client_ids;
  j["counts"] = p.counts;
  if (!p.fractions.empty()) j["fractions"] = p.fractions;
  if (!p.scenario_mix.empty()) {
    Json m = Json::object();
    for (const auto& [id, mix] : p.scenario_mix) m[id] = mix_json(mix);
    j["scenario_mix"] = m;
  }
  if (p.eval_client) j["eval_client"] = p.client_ids.at(*p.eval_client);
  return j;
}

PartitionPlan plan_from_json(const Json& j, std::string_view where_sv) {
  const std::string where(where_sv);
  check_keys(j, where,
             {"schema_version", "name", "kind", "class_names", "totals", "client_ids", "counts",
              "fractions", "scenario_mix", "eval_client"});
  for (auto key : {"class_names", "client_ids", "counts"}) {
    if (!j.contains(key)) throw ConfigError(join(where, key) + ": required");
  }
  if (auto* v = field(j, "schema_version"); v && get_int(*v, where + ".schema_version") != 1) {
    throw ConfigError(where + ".schema_version: only 1 is supported");
  }
  PartitionPlan p;
  if (auto* v = field(j, "name")) p.name = get_string(*v, where + ".name");
  if (auto* v = field(j, "kind")) {
    const auto k = get_string(*v, where + ".kind");
    if (k == "class") {
      p.kind = PlanKind::kClass;
    } else if (k == "scenario") {
      p.kind = PlanKind::kScenario;
    } else {
      throw ConfigError(where + ".kind: expected class or scenario");
    }
  }
  p.class_names = get_strings(j["class_names"], where + ".class_names");
  p.client_ids = get_strings(j["client_ids"], where + ".client_ids");
  p.counts = get_array<std::vector<std::size_t>>(
      j["counts"], where + ".counts", [](const Json& row, const std::string& w) { return get_sizes(row, w); });
  p.totals = j.contains("totals") ? get_sizes(j["totals"], where + ".totals") : p.column_sums();
  if (auto* v = field(j, "fractions")) p.fractions = get_doubles(*v, where + ".fractions");
  if (auto* v = field(j, "scenario_mix")) {
    if (!v->is_object()) throw ConfigError(where + ".scenario_mix: expected an object");
    for (const auto& [id, mix] : v->items()) {
      p.scenario_mix[id] = get_mix(mix, where + ".scenario_mix." + id);
    }
  }
  if (auto* v = field(j, "eval_client")) {
    const auto id = get_string(*v, where + ".eval_client");
    auto it = std::find(p.client_ids.begin(), p.client_ids.end(), id);
    if (it == p.client_ids.end()) throw ConfigError(where + ".eval_client: unknown client");
    p.eval_client = static_cast<std::size_t>(it - p.client_ids.begin());
  }
  with_path(where, [&] { p.validate(); });
  return p;
}

Json overlap_to_json(const OverlapPlan& p) {
  Json j;
  j["schema_version"] = 1;
  j["kind"] = "overlap";
  j["n_clients"] = p.n_clients;
  j["n_partitions"] = p.n_partitions;
  j["window"] = p.window;
  j["assignment"] = p.assignment;
  return j;
}

OverlapPlan overlap_from_json(const Json& j) {
  check_keys(j, "overlap", {"schema_version", "kind", "n_clients", "n_partitions", "window", "assignment"});
  OverlapPlan p;
  p.n_clients = get_size(j.at("n_clients"), "overlap.n_clients");
  p.n_partitions = get_size(j.at("n_partitions"), "overlap.n_partitions");
  p.window = get_size(j.at("window"), "overlap.window");
  p.assignment = get_array<std::vector<std::size_t>>(
      j.at("assignment"), "overlap.assignment",
      [](const Json& row, const std::string& w) { return get_sizes(row, w); });
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Experiment configs

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["strategy"] = std::string(to_string(c.strategy));
  j["rounds"] = c.rounds;
  j["master_seed"] = c.master_seed;
  j["train"] = {{"local_epochs", c.train.local_epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"prox_mu", c.train.prox_mu},
                {"seed", c.train.seed}};
  j["task"] = task_to_json(c.task);
  Json data;
  data["plan"] = plan_to_json(c.data.plan);
  data["scale"] = c.data.scale;
  data["holdout_ratio"] = c.data.holdout_ratio;
  data["train_columns"] = c.data.train_columns;
  data["eval_columns"] = c.data.eval_columns;
  Json extras = Json::array();
  for (const auto& e : c.data.extra_evals) {
    extras.push_back({{"name", e.name}, {"columns", e.columns}, {"scenario_mix", mix_json(e.scenario_mix)}});
  }
  data["extra_evals"] = extras;
  Json noise = Json::object();
  for (const auto& [res, f] : c.data.resolution_noise) noise[std::to_string(res)] = f;
  data["resolution_noise"] = noise;
  j["data"] = data;
  Json clients = Json::array();
  for (const auto& cl : c.clients) clients.push_back(client_to_json(cl));
  j["clients"] = clients;
  j["async"] = {{"alpha", c.async.alpha},
                {"staleness_exponent", c.async.staleness_exponent},
                {"applications", c.async_applications}};
  j["aggregation_window_s"] = c.aggregation_window_s;
  j["calibration_file"] = c.calibration_file;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  check_keys(j, "config",
             {"schema_version", "name", "strategy", "rounds", "master_seed", "train", "task", "data",
              "clients", "client_defaults", "async", "aggregation_window_s", "calibration_file"});
  ExperimentConfig c;
  if (!j.contains("schema_version")) throw ConfigError("schema_version: required (use 1)");
  c.schema_version = get_int(j["schema_version"], "schema_version");
  if (c.schema_version != 1) throw ConfigError("schema_version: only 1 is supported");
  if (auto* v = field(j, "name")) c.name = get_string(*v, "name");
  if (auto* v = field(j, "strategy")) c.strategy = parse_strategy(get_string(*v, "strategy"));
  if (auto* v = field(j, "rounds")) c.rounds = get_size(*v, "rounds");
  if (auto* v = field(j, "master_seed")) c.master_seed = get_u64(*v, "master_seed");

  c.train.prox_mu = c.strategy == Strategy::kFedProx ? 0.01 : 0.0;
  if (auto* t = field(j, "train")) {
    check_keys(*t, "train", {"local_epochs", "batch_size", "learning_rate", "prox_mu", "seed"});
    if (auto* v = field(*t, "local_epochs")) c.train.local_epochs = get_size(*v, "train.local_epochs");
    if (auto* v = field(*t, "batch_size")) c.train.batch_size = get_size(*v, "train.batch_size");
    if (auto* v = field(*t, "learning_rate")) c.train.learning_rate = get_double(*v, "train.learning_rate");
    if (auto* v = field(*t, "prox_mu")) c.train.prox_mu = get_double(*v, "train.prox_mu");
    if (auto* v = field(*t, "seed")) c.train.seed = get_u64(*v, "train.seed");
  }
  if (auto* t = field(j, "task")) c.task = task_from_json(*t);

  const Json* data = field(j, "data");
  if (!data) throw ConfigError("data: required (at least data.plan)");
  check_keys(*data, "data",
             {"plan", "scale", "holdout_ratio", "train_columns", "eval_columns", "extra_evals",
              "resolution_noise"});
  if (!data->contains("plan")) throw ConfigError("data.plan: required");
  c.data.plan = plan_spec_from_json((*data)["plan"]);
  if (auto* v = field(*data, "scale")) c.data.scale = get_double(*v, "data.scale");
  if (auto* v = field(*data, "holdout_ratio")) c.data.holdout_ratio = get_double(*v, "data.holdout_ratio");
  if (auto* v = field(*data, "train_columns")) c.data.train_columns = get_strings(*v, "data.train_columns");
  if (auto* v = field(*data, "eval_columns")) c.data.eval_columns = get_strings(*v, "data.eval_columns");
  if (auto* v = field(*data, "extra_evals")) {
    c.data.extra_evals = get_array<EvalSetSpec>(*v, "data.extra_evals", [](const Json& e, const std::string& w) {
      check_keys(e, w, {"name", "columns", "scenario_mix"});
      EvalSetSpec s;
      if (!e.contains("name")) throw ConfigError(w + ".name: required");
      s.name = get_string(e["name"], w + ".name");
      if (auto* cols = field(e, "columns")) s.columns = get_strings(*cols, w + ".columns");
      if (auto* mix = field(e, "scenario_mix")) s.scenario_mix = get_mix(*mix, w + ".scenario_mix");
      return s;
    });
  }
  if (auto* v = field(*data, "resolution_noise")) {
    if (!v->is_object()) throw ConfigError("data.resolution_noise: expected an object");
    c.data.resolution_noise.clear();
    for (const auto& [res, f] : v->items()) {
      int r = 0;
      try {
        r = std::stoi(res);
      } catch (const std::exception&) {
        throw ConfigError("data.resolution_noise." + res + ": key must be an integer resolution");
      }
      c.data.resolution_noise[r] = get_double(f, "data.resolution_noise." + res);
      if (!(c.data.resolution_noise[r] > 0.0)) {
        throw ConfigError("data.resolution_noise." + res + ": must be > 0");
      }
    }
  }

  ClientSpec defaults;
  if (auto* v = field(j, "client_defaults")) client_fields(defaults, *v, "client_defaults", false);
  defaults.batch = static_cast<int>(c.train.batch_size);
  if (auto* v = field(j, "client_defaults"); v && v->contains("batch")) {
    defaults.batch = get_int((*v)["batch"], "client_defaults.batch");
  }
  if (auto* v = field(j, "clients")) {
    if (!v->is_array()) throw ConfigError("clients: expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      ClientSpec cl = defaults;
      const std::string w = "clients[" + std::to_string(i) + "]";
      client_fields(cl, (*v)[i], w, true);
      if (cl.id.empty()) throw ConfigError(w + ".id: required");
      if (cl.shards.empty()) {
        auto it = std::find(c.data.plan.client_ids.begin(), c.data.plan.client_ids.end(), cl.id);
        if (it == c.data.plan.client_ids.end()) {
          throw ConfigError(w + ".shards: required when the id is not a plan row");
        }
        cl.shards = {static_cast<std::size_t>(it - c.data.plan.client_ids.begin())};
      }
      c.clients.push_back(std::move(cl));
    }
  } else {
    for (std::size_t r = 0; r < c.data.plan.n_clients(); ++r) {
      if (c.data.plan.eval_client && *c.data.plan.eval_client == r) continue;
      ClientSpec cl = defaults;
      cl.id = c.data.plan.client_ids[r];
      cl.shards = {r};
      c.clients.push_back(std::move(cl));
    }
  }

  if (auto* a = field(j, "async")) {
    check_keys(*a, "async", {"alpha", "staleness_exponent", "applications"});
    if (auto* v = field(*a, "alpha")) c.async.alpha = get_double(*v, "async.alpha");
    if (auto* v = field(*a, "staleness_exponent")) {
      c.async.staleness_exponent = get_double(*v, "async.staleness_exponent");
    }
    if (auto* v = field(*a, "applications")) c.async_applications = get_size(*v, "async.applications");
  }
  if (auto* v = field(j, "aggregation_window_s")) {
    c.aggregation_window_s = get_double(*v, "aggregation_window_s");
  }
  if (auto* v = field(j, "calibration_file")) c.calibration_file = get_string(*v, "calibration_file");
  c.validate();
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string dump_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  write_file_atomic(path, dump_config(cfg));
}

std::string config_digest(const ExperimentConfig& cfg) {
  const auto text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string to_hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double from_hexfloat(std::string_view s) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) {
    throw ConfigError("checkpoint: malformed hex-float \"" + str + "\"");
  }
  return v;
}

namespace {

Json hex_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(to_hexfloat(x));
  return a;
}

std::vector<double> hex_vector(const Json& j, const std::string& where) {
  return get_array<double>(j, where, [](const Json& v, const std::string& w) {
    return from_hexfloat(get_string(v, w));
  });
}

}  // namespace

Json checkpoint_to_json(const Checkpoint& cp) {
  Json j;
  j["format"] = "fedsim-checkpoint";
  j["schema_version"] = cp.schema_version;
  j["float_encoding"] = "hexfloat";
  j["config_digest"] = cp.config_digest;
  j["strategy"] = std::string(to_string(cp.strategy));
  j["round"] = cp.round;
  j["version"] = cp.version;
  j["clock_s"] = to_hexfloat(cp.clock_s);
  j["global"] = hex_array(cp.global);
  j["eval_history"] = hex_array(cp.eval_history);
  j["log_records"] = cp.log_records;
  Json cursors = Json::object();
  for (const auto& [id, n] : cp.rng_cursors) cursors[id] = n;
  j["rng_cursors"] = cursors;
  Json async;
  async["applications"] = cp.applications;
  Json flights = Json::array();
  for (const auto& f : cp.in_flight) {
    flights.push_back({{"client_id", f.client_id},
                       {"t_fetch", to_hexfloat(f.t_fetch)},
                       {"t_done", to_hexfloat(f.t_done)},
                       {"base_version", f.base_version},
                       {"retry", f.retry},
                       {"snapshot", hex_array(f.snapshot)}});
  }
  async["in_flight"] = flights;
  Json per = Json::object();
  for (const auto& [id, n] : cp.applications_per_client) per[id] = n;
  async["applications_per_client"] = per;
  async["oom_reported"] = std::vector<std::string>(cp.oom_reported.begin(), cp.oom_reported.end());
  j["async"] = async;
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  check_keys(j, "checkpoint",
             {"format", "schema_version", "float_encoding", "config_digest", "strategy", "round",
              "version", "clock_s", "global", "eval_history", "log_records", "rng_cursors", "async"});
  try {
    if (j.at("format") != "fedsim-checkpoint") throw ConfigError("checkpoint.format: not a checkpoint");
    if (j.at("float_encoding") != "hexfloat") {
      throw ConfigError("checkpoint.float_encoding: only hexfloat is supported");
    }
    Checkpoint cp;
    cp.schema_version = get_int(j.at("schema_version"), "checkpoint.schema_version");
    cp.config_digest = get_string(j.at("config_digest"), "checkpoint.config_digest");
    cp.strategy = parse_strategy(get_string(j.at("strategy"), "checkpoint.strategy"));
    cp.round = get_size(j.at("round"), "checkpoint.round");
    cp.version = j.at("version").get<std::int64_t>();
    cp.clock_s = from_hexfloat(get_string(j.at("clock_s"), "checkpoint.clock_s"));
    cp.global = hex_vector(j.at("global"), "checkpoint.global");
    cp.eval_history = hex_vector(j.at("eval_history"), "checkpoint.eval_history");
    cp.log_records = get_size(j.at("log_records"), "checkpoint.log_records");
    for (const auto& [id, n] : j.at("rng_cursors").items()) {
      cp.rng_cursors[id] = get_u64(n, "checkpoint.rng_cursors." + id);
    }
    const auto& a = j.at("async");
    cp.applications = get_size(a.at("applications"), "checkpoint.async.applications");
    for (const auto& f : a.at("in_flight")) {
      InFlight fl;
      fl.client_id = get_string(f.at("client_id"), "checkpoint.async.in_flight.client_id");
      fl.t_fetch = from_hexfloat(get_string(f.at("t_fetch"), "checkpoint.async.in_flight.t_fetch"));
      fl.t_done = from_hexfloat(get_string(f.at("t_done"), "checkpoint.async.in_flight.t_done"));
      fl.base_version = f.at("base_version").get<std::int64_t>();
      fl.retry = get_bool(f.at("retry"), "checkpoint.async.in_flight.retry");
      fl.snapshot = hex_vector(f.at("snapshot"), "checkpoint.async.in_flight.snapshot");
      cp.in_flight.push_back(std::move(fl));
    }
    for (const auto& [id, n] : a.at("applications_per_client").items()) {
      cp.applications_per_client[id] = get_size(n, "checkpoint.async.applications_per_client");
    }
    for (const auto& id : get_strings(a.at("oom_reported"), "checkpoint.async.oom_reported")) {
      cp.oom_reported.insert(id);
    }
    return cp;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  write_file_atomic(path, checkpoint_to_json(cp).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("checkpoint " + path + ": invalid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SimulationError("cannot write " + tmp);
    out << contents;
    if (!out) throw SimulationError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fedsim
