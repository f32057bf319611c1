// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "fedsim/aggregation.hpp"
#include "fedsim/error.hpp"
#include "test_support.hpp"

using namespace fedsim;
using fedsim::testing::random_params;

namespace {

std::vector<ClientUpdate> random_updates(std::mt19937_64& gen, std::size_t k, std::size_t dim) {
  std::uniform_int_distribution<std::size_t> nd(1, 5000);
  std::vector<ClientUpdate> ups;
  for (std::size_t i = 0; i < k; ++i) {
    ups.push_back({"C" + std::to_string(i + 1), random_params(dim, gen), nd(gen), 0});
  }
  return ups;
}

}  // namespace

TEST_CASE("fedavg equals the brute-force weighted mean") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ups = random_updates(gen, 1 + trial % 9, 17);
    long double total = 0;
    for (const auto& u : ups) total += u.n_samples;
    const auto got = fedavg_aggregate(ups);
    for (std::size_t j = 0; j < 17; ++j) {
      long double s = 0;
      for (const auto& u : ups) s += static_cast<long double>(u.n_samples) * u.params[j];
      CHECK(std::abs(static_cast<double>(s / total) - got[j]) < 1e-12);
    }
  }
}

TEST_CASE("fedavg is invariant to order and to a common weight scale") {
  std::mt19937_64 gen(4);
  auto ups = random_updates(gen, 7, 11);
  const auto base = fedavg_aggregate(ups);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(ups.begin(), ups.end(), gen);
    CHECK(fedavg_aggregate(ups) == base);
  }
  auto scaled = ups;
  for (auto& u : scaled) u.n_samples *= 3;
  const auto s = fedavg_aggregate(scaled);
  for (std::size_t j = 0; j < base.size(); ++j) CHECK(std::abs(s[j] - base[j]) < 1e-14);
}

TEST_CASE("fedavg of identical models is that model") {
  std::mt19937_64 gen(5);
  const auto w = random_params(9, gen);
  std::vector<ClientUpdate> ups{{"A", w, 3, 0}, {"B", w, 10, 0}};
  const auto got = fedavg_aggregate(ups);
  for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(got[j] - w[j]) < 1e-15);
}

TEST_CASE("fedavg protocol errors") {
  std::vector<ClientUpdate> none;
  CHECK_THROWS_AS(fedavg_aggregate(none), ProtocolError);
  std::vector<ClientUpdate> bad{{"A", {1, 2}, 1, 0}, {"B", {1}, 1, 0}};
  CHECK_THROWS_AS(fedavg_aggregate(bad), ProtocolError);
  std::vector<ClientUpdate> empty{{"A", {1, 2}, 0, 0}};
  CHECK_THROWS_AS(fedavg_aggregate(empty), ProtocolError);
}

TEST_CASE("staleness weight") {
  AsyncConfig cfg{0.6, 0.5};
  CHECK(staleness_weight(cfg, 0) == 0.6);
  CHECK(std::abs(staleness_weight(cfg, 3) - 0.6 / 2.0) < 1e-15);
  cfg.staleness_exponent = 0.0;
  CHECK(staleness_weight(cfg, 100) == 0.6);
  cfg.staleness_exponent = 1.0;
  double prev = 1.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double w = staleness_weight(cfg, s);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("async config validation") {
  CHECK_THROWS_AS((AsyncConfig{0.0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((AsyncConfig{1.5, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((AsyncConfig{0.5, -1.0}.validate()), ConfigError);
  CHECK_NOTHROW((AsyncConfig{1.0, 0.0}.validate()));
}

TEST_CASE("fedasync mixes with the staleness weight") {
  std::mt19937_64 gen(6);
  const auto g = random_params(8, gen);
  const auto u = random_params(8, gen);
  const AsyncConfig cfg{0.5, 1.0};
  const auto step = fedasync_update(g, 5, {"A", u, 10, 2}, cfg);
  CHECK(step.staleness == 3);
  CHECK(step.version == 6);
  const double a = 0.5 / 4.0;
  CHECK(step.mix_weight == a);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(std::abs(step.params[j] - ((1 - a) * g[j] + a * u[j])) < 1e-15);
  }
  CHECK_THROWS_AS(fedasync_update(g, 5, {"A", u, 10, 6}, cfg), ProtocolError);
  CHECK_THROWS_AS(fedasync_update(g, 5, {"A", {1.0}, 10, 0}, cfg), ProtocolError);
  const auto full = fedasync_update(g, 0, {"A", u, 1, 0}, AsyncConfig{1.0, 0.5});
  CHECK(full.params == u);
}
