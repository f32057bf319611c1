// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedsim/error.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kMeansTag = 0x6d65616e;   // "mean"
constexpr std::uint64_t kShiftTag = 0x7368696674;  // "shift"

// Scores for one sample into `out` (size n_classes).
void class_scores(const SyntheticTask& task, std::span<const double> w,
                  std::span<const double> x, std::vector<double>& out) {
  const std::size_t d = task.n_features;
  const std::size_t bias = task.n_classes * d;
  for (std::size_t c = 0; c < task.n_classes; ++c) {
    double s = w[bias + c];
    const double* wc = w.data() + c * d;
    for (std::size_t j = 0; j < d; ++j) s += wc[j] * x[j];
    out[c] = s;
  }
}

// Replaces scores by softmax probabilities; returns log-sum-exp.
double softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return mx + std::log(sum);
}

void check_params(const SyntheticTask& task, std::span<const double> w) {
  if (w.size() != task.param_count()) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(w.size()) +
                                ", task expects " + std::to_string(task.param_count()));
  }
}

}  // namespace

void SyntheticTask::validate() const {
  if (n_classes < 2) throw ConfigError("task.n_classes: must be >= 2");
  if (n_features < 1) throw ConfigError("task.n_features: must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("task.noise_sigma: must be finite and >= 0");
  }
  if (class_means.size() != n_classes) {
    throw ConfigError("task.class_means: expected " + std::to_string(n_classes) + " rows");
  }
  for (const auto& m : class_means) {
    if (m.size() != n_features) {
      throw ConfigError("task.class_means: every row needs " + std::to_string(n_features) +
                        " entries");
    }
  }
  for (std::size_t a = 0; a < n_classes; ++a) {
    for (std::size_t b = a + 1; b < n_classes; ++b) {
      if (class_means[a] == class_means[b]) {
        throw ConfigError("task.class_means: rows " + std::to_string(a) + " and " +
                          std::to_string(b) + " coincide");
      }
    }
  }
  auto ref = scenario_shifts.find(kReferenceScenario);
  if (ref == scenario_shifts.end() ||
      std::any_of(ref->second.begin(), ref->second.end(), [](double v) { return v != 0.0; })) {
    throw ConfigError("task.scenario_shifts: needs a zero entry named \"reference\"");
  }
  for (const auto& [tag, shift] : scenario_shifts) {
    if (shift.size() != n_features) {
      throw ConfigError("task.scenario_shifts." + tag + ": expected " +
                        std::to_string(n_features) + " entries");
    }
  }
}

std::vector<std::vector<double>> seeded_class_means(std::size_t n_classes,
                                                    std::size_t n_features,
                                                    std::uint64_t seed) {
  CounterRng rng(make_key({seed, kMeansTag}));
  std::vector<std::vector<double>> means(n_classes, std::vector<double>(n_features));
  for (auto& row : means) {
    for (double& v : row) v = rng.normal();
  }
  return means;
}

std::vector<double> seeded_shift(std::size_t n_features, double norm, std::uint64_t seed,
                                 std::uint64_t index) {
  CounterRng rng(make_key({seed, kShiftTag, index}));
  std::vector<double> v(n_features);
  double sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double scale = sq > 0.0 ? norm / std::sqrt(sq) : 0.0;
  for (double& x : v) x *= scale;
  return v;
}

SyntheticTask default_task() {
  SyntheticTask t;
  t.n_classes = 8;
  t.n_features = 16;
  t.noise_sigma = 1.0;
  t.class_means = seeded_class_means(t.n_classes, t.n_features, kDefaultMeansSeed);
  t.scenario_shifts[kReferenceScenario] = std::vector<double>(t.n_features, 0.0);
  return t;
}

std::vector<std::size_t> LocalDataset::class_counts(std::size_t n_classes) const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : labels) ++counts.at(y);
  return counts;
}

void LocalDataset::append(const LocalDataset& other) {
  if (other.empty()) return;
  if (empty() && n_features == 0) n_features = other.n_features;
  if (other.n_features != n_features) {
    throw std::invalid_argument("cannot append datasets of different feature width");
  }
  features.insert(features.end(), other.features.begin(), other.features.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  scenarios.insert(scenarios.end(), other.scenarios.begin(), other.scenarios.end());
}

void TrainConfig::validate() const {
  if (local_epochs < 1) throw ConfigError("train.local_epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate: must be finite and >= 0");
  }
  if (!(prox_mu >= 0.0) || !std::isfinite(prox_mu)) {
    throw ConfigError("train.prox_mu: must be finite and >= 0");
  }
}

LocalDataset generate_dataset(const SyntheticTask& task, std::span<const std::size_t> plan_row,
                              const ScenarioMix& scenario_mix, std::uint64_t seed,
                              std::string client_id) {
  if (plan_row.size() != task.n_classes) {
    throw ConfigError("plan row has " + std::to_string(plan_row.size()) +
                      " classes, task has " + std::to_string(task.n_classes));
  }
  double mix_sum = 0.0;
  std::vector<std::string> tags;
  std::vector<double> fractions;
  for (const auto& [tag, frac] : scenario_mix) {
    if (!task.scenario_shifts.contains(tag)) {
      throw ConfigError("unknown scenario tag \"" + tag + "\"");
    }
    if (!(frac >= 0.0)) throw ConfigError("scenario fraction for \"" + tag + "\" is negative");
    mix_sum += frac;
    tags.push_back(tag);
    fractions.push_back(frac);
  }
  if (tags.empty()) {
    tags.push_back(kReferenceScenario);
    fractions.push_back(1.0);
    mix_sum = 1.0;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9) {
    throw ConfigError("scenario mix fractions sum to " + std::to_string(mix_sum) + ", not 1");
  }

  LocalDataset ds;
  ds.client_id = std::move(client_id);
  ds.n_features = task.n_features;
  std::size_t total = 0;
  for (auto c : plan_row) total += c;
  ds.features.reserve(total * task.n_features);
  ds.labels.reserve(total);
  ds.scenarios.reserve(total);

  CounterRng rng(seed);
  const double sigma = task.noise_sigma;
  for (std::size_t c = 0; c < task.n_classes; ++c) {
    const auto per_tag = largest_remainder(plan_row[c], fractions);
    for (std::size_t t = 0; t < tags.size(); ++t) {
      const auto& shift = task.scenario_shifts.at(tags[t]);
      for (std::size_t i = 0; i < per_tag[t]; ++i) {
        for (std::size_t j = 0; j < task.n_features; ++j) {
          ds.features.push_back(task.class_means[c][j] + shift[j] + sigma * rng.normal());
        }
        ds.labels.push_back(static_cast<std::uint32_t>(c));
        ds.scenarios.push_back(tags[t]);
      }
    }
  }
  return ds;
}

LossGrad loss_and_gradient(const SyntheticTask& task, std::span<const double> w,
                           const LocalDataset& data, std::span<const std::size_t> indices,
                           std::span<const double> anchor, double mu) {
  check_params(task, w);
  if (anchor.size() != w.size()) {
    throw std::invalid_argument("anchor and parameter vectors differ in length");
  }
  if (indices.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");

  const std::size_t d = task.n_features;
  const std::size_t C = task.n_classes;
  const std::size_t bias = C * d;
  LossGrad out;
  out.grad.assign(w.size(), 0.0);
  std::vector<double> p(C);
  const double inv_b = 1.0 / static_cast<double>(indices.size());

  double ce = 0.0;
  for (auto i : indices) {
    if (i >= data.size()) throw std::out_of_range("batch index out of range");
    const auto x = data.row(i);
    const auto y = data.labels[i];
    class_scores(task, w, x, p);
    const double score_y = p[y];
    const double lse = softmax_inplace(p);
    ce += lse - score_y;
    for (std::size_t c = 0; c < C; ++c) {
      const double r = (p[c] - (c == y ? 1.0 : 0.0)) * inv_b;
      double* gc = out.grad.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gc[j] += r * x[j];
      out.grad[bias + c] += r;
    }
  }
  out.loss = ce * inv_b;

  if (mu != 0.0) {
    double sq = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double diff = w[k] - anchor[k];
      sq += diff * diff;
      out.grad[k] += mu * diff;
    }
    out.loss += 0.5 * mu * sq;
  }
  return out;
}

double dataset_loss(const SyntheticTask& task, std::span<const double> w,
                    const LocalDataset& data) {
  check_params(task, w);
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  std::vector<double> z(task.n_classes);
  double ce = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    class_scores(task, w, data.row(i), z);
    const double score_y = z[data.labels[i]];
    ce += softmax_inplace(z) - score_y;
  }
  return ce / static_cast<double>(data.size());
}

LocalResult local_train(const SyntheticTask& task, const ParamVector& w0,
                        const LocalDataset& data, const TrainConfig& cfg) {
  check_params(task, w0);
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("local_train: empty dataset");

  const std::size_t n = data.size();
  const double lr = cfg.learning_rate;
  const double mu = cfg.prox_mu;
  ParamVector w = w0;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    const auto order = permutation(n, make_key({cfg.seed, epoch}));
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      // Cross-entropy gradient only; the proximal term is applied implicitly.
      const auto lg = loss_and_gradient(task, w, data, batch, w0, 0.0);
      if (mu == 0.0) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * lg.grad[k];
      } else {
        const double denom = 1.0 + lr * mu;
        for (std::size_t k = 0; k < w.size(); ++k) {
          w[k] = (w[k] - lr * lg.grad[k] + lr * mu * w0[k]) / denom;
        }
      }
    }
  }
  for (double v : w) {
    if (!std::isfinite(v)) throw SimulationError("local training diverged (non-finite parameter)");
  }
  LocalResult res;
  res.n_samples = n;
  res.train_loss = dataset_loss(task, w, data);
  res.params = std::move(w);
  return res;
}

std::uint32_t predict(const SyntheticTask& task, std::span<const double> w,
                      std::span<const double> x) {
  std::vector<double> z(task.n_classes);
  class_scores(task, w, x, z);
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < task.n_classes; ++c) {
    if (z[c] > z[best]) best = c;
  }
  return best;
}

double evaluate(const SyntheticTask& task, std::span<const double> w, const LocalDataset& data) {
  check_params(task, w);
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<double> z(task.n_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    class_scores(task, w, data.row(i), z);
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < task.n_classes; ++c) {
      if (z[c] > z[best]) best = c;
    }
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace fedsim
