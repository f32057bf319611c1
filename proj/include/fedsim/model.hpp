// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale learning task: a multinomial logistic model over Gaussian class
// clusters, plus the local trainers (plain and proximal SGD) that stand in for
// on-vehicle detector training.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

/// Flat model state exchanged between clients and server. Layout: class-major
/// weights (n_classes rows of n_features) followed by n_classes biases.
using ParamVector = std::vector<double>;

inline constexpr const char* kReferenceScenario = "reference";

struct SyntheticTask {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<std::vector<double>> class_means;
  double noise_sigma = 1.0;
  /// Feature offsets per scenario tag. Always holds a zero entry for
  /// kReferenceScenario.
  std::map<std::string, std::vector<double>> scenario_shifts;

  std::size_t param_count() const { return n_classes * n_features + n_classes; }
  ParamVector zero_params() const { return ParamVector(param_count(), 0.0); }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// 8 classes, 16 features, noise 1.0, class means drawn from a unit Gaussian
/// keyed by kDefaultMeansSeed.
inline constexpr std::uint64_t kDefaultMeansSeed = 20240611;
SyntheticTask default_task();

/// Class means drawn i.i.d. N(0, 1) from the stream make_key({seed, 0x6d65616e}).
std::vector<std::vector<double>> seeded_class_means(std::size_t n_classes,
                                                    std::size_t n_features,
                                                    std::uint64_t seed);

/// Random direction of the given Euclidean norm, keyed by (seed, index).
std::vector<double> seeded_shift(std::size_t n_features, double norm,
                                 std::uint64_t seed, std::uint64_t index);

using ScenarioMix = std::map<std::string, double>;

struct LocalDataset {
  std::string client_id;
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, size() * n_features
  std::vector<std::uint32_t> labels;
  std::vector<std::string> scenarios;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
  std::vector<std::size_t> class_counts(std::size_t n_classes) const;

  /// Appends all samples of `other` (same feature width).
  void append(const LocalDataset& other);
};

struct TrainConfig {
  std::size_t local_epochs = 3;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double prox_mu = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Samples exactly plan_row[c] points of each class c. Within a class the
/// samples are split across scenario tags by largest remainder (tags in
/// lexicographic order, ties to the earlier tag). Each feature is
/// class_mean + scenario_shift + noise_sigma * N(0, 1).
LocalDataset generate_dataset(const SyntheticTask& task,
                              std::span<const std::size_t> plan_row,
                              const ScenarioMix& scenario_mix, std::uint64_t seed,
                              std::string client_id = {});

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean cross-entropy over the batch plus (mu / 2) * ||w - anchor||^2, with
/// its analytic gradient.
LossGrad loss_and_gradient(const SyntheticTask& task, std::span<const double> w,
                           const LocalDataset& data,
                           std::span<const std::size_t> indices,
                           std::span<const double> anchor, double mu);

/// Mean cross-entropy over the whole dataset (no proximal term).
double dataset_loss(const SyntheticTask& task, std::span<const double> w,
                    const LocalDataset& data);

struct LocalResult {
  ParamVector params;
  std::size_t n_samples = 0;
  double train_loss = 0.0;  // full-dataset cross-entropy after training
};

/// Minibatch SGD over cfg.local_epochs epochs. Epoch e visits the samples in
/// permutation(n, make_key({cfg.seed, e})). With prox_mu > 0 each step is the
/// proximal update
///   w <- (w - lr * g_ce + lr * mu * w0) / (1 + lr * mu)
/// which minimizes the linearized objective plus the proximal term exactly
/// and stays stable for any mu.
LocalResult local_train(const SyntheticTask& task, const ParamVector& w0,
                        const LocalDataset& data, const TrainConfig& cfg);

/// Fraction of samples whose highest-scoring class equals the label. Ties go
/// to the lowest class index.
double evaluate(const SyntheticTask& task, std::span<const double> w,
                const LocalDataset& data);

/// Argmax class score for one sample, lowest index on ties.
std::uint32_t predict(const SyntheticTask& task, std::span<const double> w,
                      std::span<const double> x);

}  // namespace fedsim
