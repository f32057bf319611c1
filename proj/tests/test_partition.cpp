// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>

#include "catch_amalgamated.hpp"
#include "fedsim/error.hpp"
#include "fedsim/partition.hpp"

using namespace fedsim;

namespace {

// Largest remainder over exact rationals: fraction k is num[k] / den.
std::vector<std::size_t> rational_lr(std::size_t total, const std::vector<std::uint64_t>& num) {
  const std::uint64_t den = std::accumulate(num.begin(), num.end(), std::uint64_t{0});
  std::vector<std::size_t> parts(num.size());
  std::vector<std::uint64_t> rem(num.size());
  std::size_t given = 0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    parts[k] = total * num[k] / den;
    rem[k] = total * num[k] % den;
    given += parts[k];
  }
  std::vector<std::size_t> order(num.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; given < total; ++i, ++given) ++parts[order[i]];
  return parts;
}

}  // namespace

TEST_CASE("kitti-4 matches its class count table") {
  const auto p = builtin_plan("kitti-4");
  CHECK_NOTHROW(p.validate());
  const std::vector<std::vector<std::size_t>> cols = {
      {11508, 5920, 2925, 2823}, {1173, 615, 264, 280}, {434, 228, 105, 114},
      {1814, 934, 425, 426},     {117, 29, 7, 17},      {636, 321, 170, 162},
      {210, 92, 28, 92},         {395, 207, 91, 89}};
  REQUIRE(p.n_clients() == 4);
  REQUIRE(p.n_columns() == 8);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t k = 0; k < 4; ++k) CHECK(p.counts[k][c] == cols[c][k]);
  CHECK(p.client_ids.front() == "C1");
  CHECK(p.class_names.front() == "Car");
  CHECK(p.totals[0] == 11508 + 5920 + 2925 + 2823);
}

TEST_CASE("bdd-8 matches its class count table") {
  const auto p = builtin_plan("bdd-8");
  CHECK_NOTHROW(p.validate());
  const std::vector<std::vector<std::size_t>> cols = {
      {46279, 22441, 11381, 5805, 2690, 1385, 703, 665},
      {2325, 1088, 577, 291, 138, 48, 20, 30},
      {356110, 178724, 88719, 45365, 21885, 11284, 5721, 5403},
      {14909, 7507, 3705, 1935, 976, 476, 228, 235},
      {5780, 2968, 1441, 727, 347, 214, 105, 90},
      {1449, 736, 403, 225, 118, 32, 17, 22},
      {3820, 1698, 926, 446, 164, 76, 35, 45},
      {92792, 46558, 23342, 11796, 5659, 3040, 1495, 1435},
      {120510, 59410, 30131, 14896, 7307, 3812, 1787, 1833}};
  REQUIRE(p.n_clients() == 8);
  REQUIRE(p.n_columns() == 9);
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t k = 0; k < 8; ++k) CHECK(p.counts[k][c] == cols[c][k]);
}

TEST_CASE("plan validation catches broken totals") {
  auto p = builtin_plan("kitti-4");
  p.totals[2] += 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(builtin_plan("nope"), ConfigError);
}

TEST_CASE("largest remainder worked examples") {
  const double f[] = {0.5, 0.25, 0.125, 0.125};
  CHECK(largest_remainder(10, f) == std::vector<std::size_t>{5, 3, 1, 1});
  const double w[] = {0.30, 0.25, 0.20, 0.15, 0.10};
  CHECK(largest_remainder(14218, w) == std::vector<std::size_t>{4265, 3554, 2844, 2133, 1422});
  const double thirds[] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(largest_remainder(2, thirds) == std::vector<std::size_t>{1, 1, 0});
}

TEST_CASE("largest remainder agrees with an exact rational computation") {
  std::mt19937_64 gen(42);
  std::uniform_int_distribution<std::uint64_t> numd(1, 50);
  std::uniform_int_distribution<std::size_t> totd(0, 100000);
  std::uniform_int_distribution<std::size_t> kd(1, 9);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::uint64_t> num(kd(gen));
    for (auto& v : num) v = numd(gen);
    const auto den = static_cast<double>(std::accumulate(num.begin(), num.end(), std::uint64_t{0}));
    std::vector<double> f;
    for (auto v : num) f.push_back(static_cast<double>(v) / den);
    const auto total = totd(gen);
    const auto got = largest_remainder(total, f);
    CHECK(std::accumulate(got.begin(), got.end(), std::size_t{0}) == total);
    // Floating ties can differ from exact ones only when a remainder is exactly tied.
    const auto want = rational_lr(total, num);
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK((got[k] == want[k] || got[k] + 1 == want[k] || got[k] == want[k] + 1));
    }
    std::size_t diff = 0;
    for (std::size_t k = 0; k < got.size(); ++k) diff += got[k] != want[k];
    if (diff != 0) {
      // any disagreement must be between equal exact remainders
      std::vector<std::uint64_t> rem;
      for (std::size_t k = 0; k < got.size(); ++k)
        if (got[k] != want[k]) rem.push_back(total * num[k] % static_cast<std::uint64_t>(den));
      CHECK(std::adjacent_find(rem.begin(), rem.end(), std::not_equal_to<>()) == rem.end());
    }
  }
}

TEST_CASE("fractions must sum to one") {
  const double bad[] = {0.5, 0.2, 0.2};
  try {
    check_fractions(bad, "data.plan.fraction_split.fractions");
    FAIL("accepted fractions summing to 0.9");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("data.plan.fraction_split.fractions") != std::string::npos);
  }
  const double zero[] = {1.0, 0.0};
  CHECK_THROWS_AS(check_fractions(zero, "f"), ConfigError);
  const std::vector<std::string> names{"a"};
  const std::size_t totals[] = {10};
  CHECK_THROWS_AS(fraction_split(names, totals, bad), ConfigError);
}

TEST_CASE("nuscenes fraction plan") {
  const auto p = builtin_plan("nuscenes-frac-4");
  CHECK_NOTHROW(p.validate());
  CHECK(p.n_columns() == 20);
  for (std::size_t c = 0; c < 20; ++c) {
    CHECK(p.counts[0][c] == 400);
    CHECK(p.counts[1][c] == 200);
    CHECK(p.counts[2][c] == 100);
    CHECK(p.counts[3][c] == 100);
  }
  const std::vector<std::size_t> ten(20, 10);
  const auto q = nuscenes_plan(ten);
  CHECK(q.counts[0][0] == 5);
  CHECK(q.counts[1][0] == 3);
  CHECK(q.counts[2][0] == 1);
  CHECK(q.counts[3][0] == 1);
}

TEST_CASE("weather-5 scenario split") {
  const auto p = builtin_plan("weather-5");
  CHECK_NOTHROW(p.validate());
  CHECK(p.kind == PlanKind::kScenario);
  CHECK(p.n_columns() == 15);
  REQUIRE(p.class_names[0] == "Daytime|Clear");
  const std::size_t want[] = {4265, 3554, 2844, 2133, 1422};
  for (std::size_t k = 0; k < 5; ++k) CHECK(p.counts[k][0] == want[k]);
  REQUIRE(p.eval_client.has_value());
  CHECK(*p.eval_client == 2);
  std::size_t grand = 0;
  for (const auto& cell : lighting_weather_table()) grand += cell.count;
  CHECK(p.grand_total() == grand);
}

TEST_CASE("overlap windows have exact multiplicity") {
  for (std::size_t n : {1u, 4u, 6u, 60u}) {
    for (std::size_t w = 1; w <= n; w += (n > 10 ? 7 : 1)) {
      const auto o = overlap_split(n, w);
      CHECK_NOTHROW(o.validate());
      std::vector<std::size_t> mult(n + 1, 0);
      for (const auto& a : o.assignment)
        for (auto p : a) ++mult[p];
      for (std::size_t p = 1; p <= n; ++p) CHECK(mult[p] == w);
    }
  }
  CHECK_THROWS_AS(overlap_split(4, 5), ConfigError);
  CHECK_THROWS_AS(overlap_split(4, 0), ConfigError);
}

TEST_CASE("overlap holders") {
  const auto o = overlap_split(6, 5);
  CHECK(o.assignment[0] == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(o.assignment[5] == std::vector<std::size_t>{6, 1, 2, 3, 4});
  CHECK(o.holders(3) == std::vector<std::size_t>{3, 2, 1, 6, 5});
  const auto big = overlap_split(60, 5);
  CHECK(big.assignment[59] == std::vector<std::size_t>{60, 1, 2, 3, 4});
  CHECK(big.holders(1).size() == 5);
}

TEST_CASE("overlap validation rejects a tampered window") {
  auto o = overlap_split(6, 3);
  o.assignment[2][1] = 6;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = overlap_split(6, 3);
  o.assignment[1].pop_back();
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("column selectors") {
  CHECK(column_matches("Night|Rainy", "Night"));
  CHECK(column_matches("Night|Rainy", "Rainy"));
  CHECK(column_matches("Dawn/Dusk|Clear", "Dawn"));
  CHECK_FALSE(column_matches("Night|Rainy", "Snowy"));
  CHECK_FALSE(column_matches("Daytime|Clear", "Night"));
  const auto p = builtin_plan("weather-5");
  const std::vector<std::string> sel{"Rainy", "Snowy"};
  const auto f = filter_columns(p, sel);
  CHECK(f.n_columns() == 6);
  CHECK_NOTHROW(f.validate());
  const std::vector<std::string> none{"Foggy"};
  CHECK_THROWS_AS(filter_columns(p, none), ConfigError);
}

TEST_CASE("scale_plan rounds half away from zero") {
  PartitionPlan p;
  p.name = "t";
  p.client_ids = {"C1", "C2"};
  p.class_names = {"a", "b"};
  p.counts = {{5, 3}, {15, 1}};
  p.totals = p.column_sums();
  const auto s = scale_plan(p, 0.1);
  CHECK(s.counts[0] == std::vector<std::size_t>{1, 0});
  CHECK(s.counts[1] == std::vector<std::size_t>{2, 0});
  CHECK(s.totals == std::vector<std::size_t>{3, 0});
  CHECK_THROWS_AS(scale_plan(p, 0.01), ConfigError);
  CHECK_THROWS_AS(scale_plan(p, 0.0), ConfigError);
  CHECK(scale_plan(p, 1.0).counts == p.counts);
}
