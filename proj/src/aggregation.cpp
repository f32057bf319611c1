// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

void AsyncConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("async.alpha: must lie in (0, 1]");
  if (!(staleness_exponent >= 0.0) || !std::isfinite(staleness_exponent)) {
    throw ConfigError("async.staleness_exponent: must be finite and >= 0");
  }
}

ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ProtocolError("fedavg_aggregate: no client updates");
  const std::size_t dim = updates.front().params.size();
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    if (u.params.size() != dim) {
      throw ProtocolError("fedavg_aggregate: update from " + u.client_id + " has " +
                          std::to_string(u.params.size()) + " parameters, expected " +
                          std::to_string(dim));
    }
    total += u.n_samples;
  }
  if (total == 0) throw ProtocolError("fedavg_aggregate: updates carry zero samples");

  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });

  ParamVector out(dim, 0.0);
  const double denom = static_cast<double>(total);
  for (auto k : order) {
    const auto& u = updates[k];
    const double weight = static_cast<double>(u.n_samples) / denom;
    for (std::size_t j = 0; j < dim; ++j) out[j] += weight * u.params[j];
  }
  return out;
}

double staleness_weight(const AsyncConfig& cfg, std::uint64_t staleness) {
  return cfg.alpha * std::pow(static_cast<double>(staleness) + 1.0, -cfg.staleness_exponent);
}

AsyncStep fedasync_update(const ParamVector& global, std::int64_t version,
                          const ClientUpdate& update, const AsyncConfig& cfg) {
  if (update.base_version > version) {
    throw ProtocolError("fedasync_update: update from " + update.client_id +
                        " is based on version " + std::to_string(update.base_version) +
                        " but the server is at " + std::to_string(version));
  }
  if (update.params.size() != global.size()) {
    throw ProtocolError("fedasync_update: parameter length mismatch");
  }
  AsyncStep step;
  step.staleness = static_cast<std::uint64_t>(version - update.base_version);
  step.mix_weight = staleness_weight(cfg, step.staleness);
  step.params.resize(global.size());
  const double keep = 1.0 - step.mix_weight;
  for (std::size_t j = 0; j < global.size(); ++j) {
    step.params[j] = keep * global[j] + step.mix_weight * update.params[j];
  }
  step.version = version + 1;
  return step;
}

}  // namespace fedsim
