// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "fedsim/model.hpp"

namespace fedsim {

struct ClientUpdate {
  std::string client_id;
  ParamVector params;
  std::size_t n_samples = 0;
  std::int64_t base_version = 0;  // global version the client trained from
};

struct AsyncConfig {
  double alpha = 0.6;               // in (0, 1]
  double staleness_exponent = 0.5;  // a >= 0

  void validate() const;
};

/// Sample-weighted mean sum_k n_k w_k / N. Updates are accumulated in
/// ascending client_id order with weights n_k / N, N summed in integers, so
/// the result does not depend on input order or on a common scale of n_k.
ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates);

/// alpha * (staleness + 1)^(-a).
double staleness_weight(const AsyncConfig& cfg, std::uint64_t staleness);

struct AsyncStep {
  ParamVector params;
  std::int64_t version = 0;
  std::uint64_t staleness = 0;
  double mix_weight = 0.0;
};

/// (1 - a_t) * global + a_t * update.params with a_t = staleness_weight(version
/// - base_version). Throws ProtocolError for an update based on a version the
/// server has not produced yet.
AsyncStep fedasync_update(const ParamVector& global, std::int64_t version,
                          const ClientUpdate& update, const AsyncConfig& cfg);

}  // namespace fedsim
