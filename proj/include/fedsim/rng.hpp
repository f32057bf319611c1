// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Every random draw in the simulator comes from
// a stream keyed by a tuple of integers (seed, client, round, epoch, ...), so
// results never depend on call order or on the standard library's
// distribution implementations.
//
// Pinned scheme:
//   key    = fold of derive_key(acc, part) over the parts, acc starting at
//            0x6a09e667f3bcc908; derive_key(a, p) = splitmix64_mix(a ^ splitmix64_mix(p + golden))
//   stream = SplitMix64 with state = key; next() adds 0x9e3779b97f4a7c15 and mixes
//   uniform = (next() >> 11) * 2^-53 in [0, 1)
//   normal  = Box-Muller, u1 = 1 - uniform, u2 = uniform, cosine branch only
//   bounded(n) = high 64 bits of next() * n
//   permutation(n) = Fisher-Yates from i = n-1 down to 1, j = bounded(i + 1)

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fedsim {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t acc, std::uint64_t part) {
  return splitmix64_mix(acc ^ splitmix64_mix(part + kGolden));
}

constexpr std::uint64_t make_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t acc = 0x6a09e667f3bcc908ULL;
  for (auto p : parts) acc = derive_key(acc, p);
  return acc;
}

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : state_(key) {}

  constexpr std::uint64_t next() {
    state_ += kGolden;
    return splitmix64_mix(state_);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t bounded(std::uint64_t n);

 private:
  std::uint64_t state_;
};

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t key);

}  // namespace fedsim
