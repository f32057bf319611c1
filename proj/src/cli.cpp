// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "fedsim/config_io.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/error.hpp"
#include "fedsim/orchestrator.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/report.hpp"
#include "fedsim/scenarios.hpp"

namespace fedsim {
namespace {

struct PartitionArgs {
  std::string plan;
  std::size_t clients = 0;
  std::size_t window = 0;
  double scale = 1.0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> totals;
  std::vector<double> fractions;
  std::string out;
};

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log;
  std::string checkpoint;
  std::size_t stop_after = 0;
  std::size_t checkpoint_every = 1;
};

struct ReportArgs {
  std::vector<std::string> logs;
  std::string format = "table";
  std::string out;
};

struct CostArgs {
  std::string arch = "v8";
  std::optional<int> res;
  int batch = 32;
  std::string strategy = "fedavg";
  double data_fraction = 1.0;
  double speed = 1.0;
  double capacity = 49140.0;
  bool json = false;
  bool validate = false;
  bool extrapolate = false;
  std::string calibration;
};

struct ScenarioArgs {
  std::string write_dir;
  std::string show;
};

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

// A path to a config file, or the name of a built-in scenario.
ExperimentConfig resolve_config(const std::string& name) {
  if (std::filesystem::exists(name)) return load_config(name);
  for (const auto& n : builtin_scenario_names()) {
    if (n == name) return builtin_scenario(name);
  }
  throw ConfigError("config " + name + ": no such file or built-in scenario");
}

int cmd_partition(const PartitionArgs& a, std::ostream& out) {
  Json j;
  if (a.plan == "overlap") {
    if (a.clients == 0 || a.window == 0) {
      throw ConfigError("partition --plan overlap needs --clients and --window");
    }
    auto ov = overlap_split(a.clients, a.window);
    ov.validate();
    j = overlap_to_json(ov);
  } else if (a.plan == "fraction") {
    check_fractions(a.fractions, "--fractions");
    auto names = a.class_names;
    if (names.empty()) {
      for (std::size_t c = 0; c < a.totals.size(); ++c) names.push_back("class" + std::to_string(c));
    }
    auto plan = scale_plan(fraction_split(names, a.totals, a.fractions), a.scale);
    plan.validate();
    j = plan_to_json(plan);
  } else {
    auto plan = scale_plan(builtin_plan(a.plan), a.scale);
    plan.validate();
    j = plan_to_json(plan);
  }
  write_output(a.out, j.dump(2) + "\n", out);
  return kExitOk;
}

void summarize(const RunResult& res, const ExperimentConfig& cfg, const std::string& log,
               std::ostream& out) {
  out << "run_id " << cfg.run_id() << "\n"
      << "status " << (res.completed ? "completed" : "stopped") << " after round "
      << res.rounds_completed << " of " << cfg.rounds << "\n"
      << "final_accuracy " << res.final_accuracy << "\n"
      << "virtual_time_s " << res.clock_s << "\n"
      << "log " << log << " (" << res.log_records << " records)\n";
}

RunOptions checkpoint_options(const RunArgs& a, const std::string& ckpt) {
  RunOptions opts;
  opts.stop_after_round = a.stop_after;
  opts.checkpoint_every = a.checkpoint_every;
  opts.on_checkpoint = [ckpt](const Checkpoint& cp) { save_checkpoint(cp, ckpt); };
  return opts;
}

int cmd_run(const RunArgs& a, std::ostream& out) {
  auto cfg = resolve_config(a.config);
  if (a.seed) cfg.master_seed = *a.seed;
  const auto log = a.log.empty() ? cfg.run_id() + ".jsonl" : a.log;
  const auto ckpt = a.checkpoint.empty() ? log + ".ckpt" : a.checkpoint;
  Workspace ws(cfg);
  std::ofstream f(log, std::ios::binary | std::ios::trunc);
  if (!f) throw SimulationError("cannot write log " + log);
  JsonlSink sink(f);
  const auto res = run_experiment(ws, sink, checkpoint_options(a, ckpt));
  summarize(res, cfg, log, out);
  if (!res.completed) out << "checkpoint " << ckpt << "\n";
  return kExitOk;
}

int cmd_resume(const RunArgs& a, std::ostream& out) {
  auto cfg = resolve_config(a.config);
  if (a.seed) cfg.master_seed = *a.seed;
  const auto log = a.log.empty() ? cfg.run_id() + ".jsonl" : a.log;
  const auto ckpt = a.checkpoint.empty() ? log + ".ckpt" : a.checkpoint;
  const auto cp = load_checkpoint(ckpt);
  checkpoint_resume(cp, cfg);
  Workspace ws(cfg);
  truncate_log(log, cp.log_records);
  std::ofstream f(log, std::ios::binary | std::ios::app);
  if (!f) throw SimulationError("cannot append to log " + log);
  JsonlSink sink(f);
  auto opts = checkpoint_options(a, ckpt);
  opts.resume = &cp;
  const auto res = run_experiment(ws, sink, opts);
  summarize(res, cfg, log, out);
  return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const auto fmt = parse_report_format(a.format);
  const auto rep = report_from_files(a.logs);
  write_output(a.out, render(rep, fmt), out);
  if (!rep.complete) {
    err << "report: log is incomplete\n";
    for (const auto& p : rep.problems) err << "  " << p << "\n";
    return kExitIncomplete;
  }
  return kExitOk;
}

Json entry_json(const CostEntry& e) {
  Json j;
  j["resolution"] = e.resolution;
  j["batch"] = e.batch;
  j["train_time_s"] = e.train_time_s;
  j["peak_mem_mib"] = e.peak_mem_mib;
  j["power_w"] = {e.power_w.first, e.power_w.second};
  j["util_pct"] = {e.util_pct.first, e.util_pct.second};
  Json inf = Json::object();
  for (const auto& [ds, ms] : e.infer_ms_per_image) inf[ds] = ms;
  j["infer_ms_per_image"] = inf;
  j["time_estimated"] = e.time_estimated;
  j["memory_estimated"] = e.memory_estimated;
  j["ranges_estimated"] = e.ranges_estimated;
  return j;
}

std::string range_str(const Range& r) {
  std::ostringstream s;
  s << r.first << "-" << r.second;
  return s.str();
}

int cmd_costs(const CostArgs& a, std::ostream& out) {
  const Calibration cal = a.calibration.empty() ? default_calibration() : load_calibration(a.calibration);
  if (a.validate) {
    cal.validate();
    std::size_t n = 0;
    for (const auto& [_, p] : cal.profiles) n += p.entries.size();
    out << "calibration ok: " << cal.profiles.size() << " architectures, " << n << " entries\n";
    return kExitOk;
  }
  const auto& prof = cal.profile(a.arch);
  if (!a.res) {
    if (a.json) {
      Json arr = Json::array();
      for (const auto& e : prof.entries) arr.push_back(entry_json(e));
      out << Json{{"architecture", a.arch}, {"entries", arr}}.dump(2) << "\n";
      return kExitOk;
    }
    out << "architecture " << a.arch << "\n";
    out << "res  batch  time_s    mem_mib    power_w  util_pct  estimated\n";
    for (const auto& e : prof.entries) {
      out << e.resolution << "  " << e.batch << "  " << e.train_time_s << "  " << e.peak_mem_mib
          << "  " << range_str(e.power_w) << "  " << range_str(e.util_pct) << "  "
          << (e.any_estimated() ? "yes" : "no") << "\n";
    }
    return kExitOk;
  }
  LookupOptions lo;
  lo.allow_extrapolation = a.extrapolate;
  const auto e = lookup(prof, *a.res, a.batch, lo);
  DeviceSpec dev;
  dev.mem_capacity_mib = a.capacity;
  dev.speed_factor = a.speed;
  dev.validate();
  const double round_s = client_round_time(e, a.data_fraction, dev, a.strategy, cal);
  const auto mem = check_memory(e, dev);
  if (a.json) {
    auto j = entry_json(e);
    j["architecture"] = a.arch;
    j["strategy"] = a.strategy;
    j["data_fraction"] = a.data_fraction;
    j["speed_factor"] = a.speed;
    j["round_time_s"] = round_s;
    j["mem_capacity_mib"] = a.capacity;
    j["feasible"] = mem.feasible;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "architecture " << a.arch << "  resolution " << e.resolution << "  batch " << e.batch
      << "\n"
      << "train_time_s " << e.train_time_s << (e.time_estimated ? "  (estimated)" : "") << "\n"
      << "peak_mem_mib " << e.peak_mem_mib << (e.memory_estimated ? "  (estimated)" : "") << "\n"
      << "power_w " << range_str(e.power_w) << "\n"
      << "util_pct " << range_str(e.util_pct) << (e.ranges_estimated ? "  (estimated)" : "")
      << "\n";
  for (const auto& [ds, ms] : e.infer_ms_per_image) out << "infer_ms_per_image " << ds << " " << ms << "\n";
  out << "round_time_s " << round_s << "  (" << a.strategy << ", data_fraction " << a.data_fraction
      << ", speed " << a.speed << ")\n"
      << "memory " << (mem.feasible ? "fits" : "OOM") << " (" << mem.required_mib << " of "
      << mem.capacity_mib << " MiB)\n";
  return kExitOk;
}

int cmd_scenarios(const ScenarioArgs& a, std::ostream& out) {
  if (!a.show.empty()) {
    out << dump_config(builtin_scenario(a.show));
    return kExitOk;
  }
  for (const auto& n : builtin_scenario_names()) {
    out << n << "  " << scenario_description(n) << "\n";
  }
  if (!a.write_dir.empty()) {
    std::filesystem::create_directories(a.write_dir);
    for (const auto& n : builtin_scenario_names()) {
      const auto path = (std::filesystem::path(a.write_dir) / (n + ".json")).string();
      save_config(builtin_scenario(n), path);
      out << "wrote " << path << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fedsim: deterministic federated learning deployment simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PartitionArgs pa;
  auto* part = app.add_subcommand("partition", "Write a partition plan as JSON");
  part->add_option("--plan", pa.plan, "Built-in plan name, 'overlap' or 'fraction'")->required();
  part->add_option("--clients", pa.clients, "Clients (overlap)");
  part->add_option("--window", pa.window, "Partitions per client (overlap)");
  part->add_option("--scale", pa.scale, "Multiply every count");
  part->add_option("--class-names", pa.class_names, "Class names (fraction)")->delimiter(',');
  part->add_option("--totals", pa.totals, "Per-class totals (fraction)")->delimiter(',');
  part->add_option("--fractions", pa.fractions, "Client fractions (fraction)")->delimiter(',');
  part->add_option("--out", pa.out, "Output file (default stdout)");

  RunArgs ra;
  auto add_run_flags = [&ra](CLI::App* c) {
    c->add_option("--config", ra.config, "Config file or built-in scenario name")->required();
    c->add_option("--seed", ra.seed, "Override master_seed");
    c->add_option("--log", ra.log, "Metrics log (default <run_id>.jsonl)");
    c->add_option("--checkpoint", ra.checkpoint, "Checkpoint file (default <log>.ckpt)");
    c->add_option("--stop-after-round", ra.stop_after, "Stop after this round");
    c->add_option("--checkpoint-every", ra.checkpoint_every, "Checkpoint period in rounds (0: off)");
  };
  auto* run = app.add_subcommand("run", "Run an experiment");
  add_run_flags(run);
  auto* resume = app.add_subcommand("resume", "Continue a run from its checkpoint");
  add_run_flags(resume);

  ReportArgs rpa;
  auto* rep = app.add_subcommand("report", "Summarize metrics logs");
  rep->add_option("--log", rpa.logs, "Metrics log (repeatable)")->required();
  rep->add_option("--format", rpa.format, "table, csv or json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  rep->add_option("--out", rpa.out, "Output file (default stdout)");

  CostArgs ca;
  auto* costs = app.add_subcommand("costs", "Query or validate the calibration tables");
  costs->add_option("--arch", ca.arch, "v5, v8 or v11");
  costs->add_option("--res", ca.res, "Input resolution (omit to list entries)");
  costs->add_option("--batch", ca.batch, "Batch size");
  costs->add_option("--strategy", ca.strategy, "fedavg, fedprox or fedasync");
  costs->add_option("--data-fraction", ca.data_fraction, "Share of the reference data volume");
  costs->add_option("--speed", ca.speed, "Device speed factor");
  costs->add_option("--capacity", ca.capacity, "Device memory in MiB");
  costs->add_flag("--json", ca.json, "JSON output");
  costs->add_flag("--validate", ca.validate, "Validate the calibration and exit");
  costs->add_flag("--allow-extrapolation", ca.extrapolate, "Permit lookups outside the table");
  costs->add_option("--calibration", ca.calibration, "Calibration JSON (default embedded)");

  ScenarioArgs sa;
  auto* scen = app.add_subcommand("scenarios", "List built-in experiment configs");
  scen->add_option("--write", sa.write_dir, "Write every scenario config into this directory");
  scen->add_option("--show", sa.show, "Print one scenario config");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*part) return cmd_partition(pa, out);
    if (*run) return cmd_run(ra, out);
    if (*resume) return cmd_resume(ra, out);
    if (*rep) return cmd_report(rpa, out, err);
    if (*costs) return cmd_costs(ca, out);
    if (*scen) return cmd_scenarios(sa, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace fedsim
