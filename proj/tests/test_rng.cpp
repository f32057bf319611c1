// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "catch_amalgamated.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

TEST_CASE("splitmix64 matches the reference sequence") {
  // Reference outputs of SplitMix64 seeded with 0 (Vigna's splitmix64.c).
  CounterRng rng(0);
  CHECK(rng.next() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next() == 0x06c45d188009454fULL);
}

TEST_CASE("keys depend on every part and on order") {
  const auto k = make_key({1, 2, 3});
  CHECK(k == make_key({1, 2, 3}));
  CHECK(k != make_key({1, 2, 4}));
  CHECK(k != make_key({3, 2, 1}));
  CHECK(k != make_key({1, 2}));
  CHECK(make_key({}) == 0x6a09e667f3bcc908ULL);
}

TEST_CASE("uniform draws stay in [0, 1) with the right mean") {
  CounterRng rng(make_key({42}));
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal draws have unit moments") {
  CounterRng rng(make_key({7}));
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    REQUIRE(std::isfinite(z));
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("bounded covers the range evenly") {
  CounterRng rng(make_key({9}));
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.bounded(7);
    REQUIRE(v < 7);
    ++hist[v];
  }
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("permutation is a deterministic permutation") {
  for (std::size_t n : {0, 1, 2, 17, 1000}) {
    auto p = permutation(n, make_key({n}));
    CHECK(p == permutation(n, make_key({n})));
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(n);
    std::iota(iota.begin(), iota.end(), std::size_t{0});
    CHECK(sorted == iota);
  }
  CHECK(permutation(50, 1) != permutation(50, 2));
}

TEST_CASE("permutation of three is uniform over the six orders") {
  std::map<std::vector<std::size_t>, int> counts;
  for (std::uint64_t k = 0; k < 60000; ++k) ++counts[permutation(3, make_key({k}))];
  REQUIRE(counts.size() == 6);
  for (const auto& [_, c] : counts) CHECK(std::abs(c - 10000) < 400);
}
