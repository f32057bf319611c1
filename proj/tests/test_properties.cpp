// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Randomized invariants over generated inputs.

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "fedsim/aggregation.hpp"
#include "fedsim/config_io.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/orchestrator.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/rng.hpp"
#include "test_support.hpp"

using namespace fedsim;

TEST_CASE("property: largest remainder conserves and stays within one of the exact share") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> fd(0.01, 1.0);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<double> f(1 + trial % 12);
    for (auto& v : f) v = fd(gen);
    const double s = std::accumulate(f.begin(), f.end(), 0.0);
    for (auto& v : f) v /= s;
    const std::size_t total = gen() % 1000000;
    const auto parts = largest_remainder(total, f);
    CHECK(std::accumulate(parts.begin(), parts.end(), std::size_t{0}) == total);
    for (std::size_t k = 0; k < f.size(); ++k) {
      CHECK(std::abs(static_cast<double>(parts[k]) - total * f[k]) < 1.0 + 1e-6);
    }
  }
}

TEST_CASE("property: every overlap partition is held by exactly window clients") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen() % 120;
    const std::size_t w = 1 + gen() % n;
    const auto o = overlap_split(n, w);
    CHECK_NOTHROW(o.validate());
    const std::size_t p = 1 + gen() % n;
    const auto h = o.holders(p);
    CHECK(h.size() == w);
    CHECK(std::set<std::size_t>(h.begin(), h.end()).size() == w);
  }
}

TEST_CASE("property: permutations are bijections for every key") {
  for (std::uint64_t k = 0; k < 500; ++k) {
    const std::size_t n = k % 97;
    auto p = permutation(n, make_key({k}));
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == i);
  }
}

TEST_CASE("property: fedavg lies in the convex hull of its inputs") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClientUpdate> ups;
    for (int k = 0; k < 1 + trial % 6; ++k) {
      ups.push_back({"C" + std::to_string(k), fedsim::testing::random_params(5, gen), 1 + gen() % 100, 0});
    }
    const auto avg = fedavg_aggregate(ups);
    for (std::size_t j = 0; j < 5; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto& u : ups) {
        lo = std::min(lo, u.params[j]);
        hi = std::max(hi, u.params[j]);
      }
      CHECK(avg[j] >= lo - 1e-12);
      CHECK(avg[j] <= hi + 1e-12);
    }
  }
}

TEST_CASE("property: fedasync moves the model toward the update") {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = fedsim::testing::random_params(6, gen);
    const auto u = fedsim::testing::random_params(6, gen);
    const AsyncConfig cfg{0.1 + 0.9 * (trial % 10) / 10.0, 0.25 * (trial % 5)};
    const std::int64_t version = static_cast<std::int64_t>(gen() % 20);
    const std::int64_t base = version - static_cast<std::int64_t>(gen() % (version + 1));
    const auto step = fedasync_update(g, version, {"X", u, 1, base}, cfg);
    CHECK(fedsim::testing::l2_distance(step.params, u) <= fedsim::testing::l2_distance(g, u) + 1e-12);
    CHECK(step.mix_weight <= cfg.alpha);
  }
}

TEST_CASE("property: interpolated costs lie between their neighbours") {
  const auto& cal = default_calibration();
  for (const auto& [arch, prof] : cal.profiles) {
    for (int b = 5; b < 32; ++b) {
      if (prof.find(960, b)) continue;
      const auto e = lookup(prof, 960, b);
      CHECK(e.train_time_s < lookup(prof, 960, 4).train_time_s);
      CHECK(e.train_time_s > lookup(prof, 960, 32).train_time_s);
      CHECK(e.peak_mem_mib > lookup(prof, 960, 4).peak_mem_mib);
      CHECK(e.peak_mem_mib < lookup(prof, 960, 32).peak_mem_mib);
    }
  }
}

TEST_CASE("property: resume at any round matches the straight run") {
  std::mt19937_64 gen(15);
  for (int trial = 0; trial < 6; ++trial) {
    auto cfg = fedsim::testing::tiny_config(trial % 2 ? Strategy::kFedAsync : Strategy::kFedAvg, 5);
    cfg.master_seed = gen() % 1000;
    cfg.clients[trial % 3].device.speed_factor = 1.0 + (trial % 4);
    cfg.clients[(trial + 1) % 3].dropout.mode = DropoutRule::Mode::kStochastic;
    cfg.clients[(trial + 1) % 3].dropout.p = 0.4;
    cfg.clients[(trial + 1) % 3].dropout.q = 0.5;
    const Workspace ws(cfg);
    std::ostringstream full;
    {
      JsonlSink sink(full);
      run_experiment(ws, sink);
    }
    const std::size_t stop = 1 + gen() % 4;
    std::optional<Checkpoint> cp;
    RunOptions opts;
    opts.stop_after_round = stop;
    opts.on_checkpoint = [&](const Checkpoint& c) { cp = c; };
    std::ostringstream part;
    {
      JsonlSink sink(part);
      run_experiment(ws, sink, opts);
    }
    REQUIRE(cp);
    // the checkpoint survives serialization
    const auto restored = checkpoint_from_json(checkpoint_to_json(*cp));
    RunOptions again;
    again.resume = &restored;
    std::ostringstream rest;
    {
      JsonlSink sink(rest);
      run_experiment(ws, sink, again);
    }
    std::string head = part.str();
    std::size_t pos = 0;
    for (std::size_t i = 0; i < cp->log_records; ++i) pos = head.find('\n', pos) + 1;
    CHECK(head.substr(0, pos) + rest.str() == full.str());
  }
}

TEST_CASE("property: every logged record satisfies the energy identity") {
  for (auto s : {Strategy::kFedAvg, Strategy::kFedProx, Strategy::kFedAsync}) {
    auto cfg = fedsim::testing::tiny_config(s, 3);
    cfg.aggregation_window_s = 12.5;
    VectorSink sink;
    run_experiment(Workspace(cfg), sink);
    for (const auto& r : sink.records()) {
      CHECK(r.t_end_s >= r.t_start_s);
      CHECK(r.energy_j == Catch::Approx(r.power_w * r.duration_s()).epsilon(1e-9));
      CHECK(parse_record(to_jsonl(r)) == r);
    }
  }
}
