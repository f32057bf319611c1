// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "catch_amalgamated.hpp"
#include "fedsim/error.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "test_support.hpp"

using namespace fedsim;
using fedsim::testing::l2_distance;
using fedsim::testing::random_params;
using fedsim::testing::small_task;

namespace {

LocalDataset make_data(const SyntheticTask& t, std::size_t per_class, std::uint64_t seed) {
  std::vector<std::size_t> row(t.n_classes, per_class);
  return generate_dataset(t, row, {}, seed, "x");
}

// Plain cross-entropy written out directly.
double oracle_loss(const SyntheticTask& t, const ParamVector& w, const LocalDataset& d,
                   const std::vector<std::size_t>& idx, const ParamVector& anchor, double mu) {
  const std::size_t C = t.n_classes, D = t.n_features;
  double total = 0.0;
  for (auto i : idx) {
    std::vector<double> z(C);
    for (std::size_t c = 0; c < C; ++c) {
      z[c] = w[C * D + c];
      for (std::size_t j = 0; j < D; ++j) z[c] += w[c * D + j] * d.features[i * D + j];
    }
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    total += m + std::log(s) - z[d.labels[i]];
  }
  double prox = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) prox += (w[k] - anchor[k]) * (w[k] - anchor[k]);
  return total / static_cast<double>(idx.size()) + 0.5 * mu * prox;
}

// Minibatch SGD written independently of the library's training loop.
ParamVector oracle_sgd(const SyntheticTask& t, ParamVector w, const LocalDataset& d,
                       const TrainConfig& cfg) {
  const std::size_t C = t.n_classes, D = t.n_features, n = d.size();
  const ParamVector w0 = w;
  for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
    const auto order = permutation(n, make_key({cfg.seed, e}));
    for (std::size_t s = 0; s < n; s += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - s);
      ParamVector g(w.size(), 0.0);
      for (std::size_t k = s; k < s + b; ++k) {
        const auto i = order[k];
        std::vector<double> z(C);
        for (std::size_t c = 0; c < C; ++c) {
          z[c] = w[C * D + c];
          for (std::size_t j = 0; j < D; ++j) z[c] += w[c * D + j] * d.features[i * D + j];
        }
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) sum += (v = std::exp(v - m));
        for (std::size_t c = 0; c < C; ++c) {
          const double r = (z[c] / sum - (c == d.labels[i] ? 1.0 : 0.0)) / static_cast<double>(b);
          for (std::size_t j = 0; j < D; ++j) g[c * D + j] += r * d.features[i * D + j];
          g[C * D + c] += r;
        }
      }
      const double lr = cfg.learning_rate, mu = cfg.prox_mu;
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = mu == 0.0 ? w[k] - lr * g[k] : (w[k] - lr * g[k] + lr * mu * w0[k]) / (1.0 + lr * mu);
      }
    }
  }
  return w;
}

}  // namespace

TEST_CASE("default task shape") {
  const auto t = default_task();
  CHECK(t.n_classes == 8);
  CHECK(t.n_features == 16);
  CHECK(t.noise_sigma == 1.0);
  CHECK(t.param_count() == 8 * 16 + 8);
  CHECK(t.class_means == seeded_class_means(8, 16, kDefaultMeansSeed));
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("task validation rejects a missing reference scenario") {
  auto t = small_task();
  t.scenario_shifts.clear();
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t.scenario_shifts["reference"] = {0.0, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("generate_dataset yields exactly the plan counts") {
  auto t = small_task(3, 4);
  t.scenario_shifts["rain"] = {5.0, 5.0, 5.0, 5.0};
  const std::vector<std::size_t> row{7, 0, 5};
  const auto d = generate_dataset(t, row, {{"rain", 0.5}, {"reference", 0.5}}, 11, "c");
  CHECK(d.size() == 12);
  CHECK(d.class_counts(3) == row);
  // 7 -> rain 4, reference 3 (tags in name order, tie to the earlier tag)
  std::size_t rain = 0;
  for (std::size_t i = 0; i < d.size(); ++i) rain += d.scenarios[i] == "rain" && d.labels[i] == 0;
  CHECK(rain == 4);
  CHECK(d.features == generate_dataset(t, row, {{"rain", 0.5}, {"reference", 0.5}}, 11).features);
  CHECK(d.features != generate_dataset(t, row, {{"rain", 0.5}, {"reference", 0.5}}, 12).features);
}

TEST_CASE("generated features centre on class mean plus shift") {
  auto t = small_task(2, 3);
  t.scenario_shifts["fog"] = {1.0, -2.0, 0.5};
  const std::vector<std::size_t> row{20000, 0};
  const auto d = generate_dataset(t, row, {{"fog", 1.0}}, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) m += d.features[i * 3 + j];
    m /= static_cast<double>(d.size());
    CHECK(std::abs(m - (t.class_means[0][j] + t.scenario_shifts["fog"][j])) < 0.03);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 gen(2024);
  const double mus[] = {0.0, 0.01, 1.0};
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto t = small_task(2 + draw % 4, 1 + draw % 5);
    const auto d = make_data(t, 5, static_cast<std::uint64_t>(draw));
    const auto w = random_params(t.param_count(), gen);
    const auto anchor = random_params(t.param_count(), gen);
    std::vector<std::size_t> idx(1 + draw % d.size());
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (auto& i : idx) i = pick(gen);
    const double mu = mus[draw % 3];
    const auto lg = loss_and_gradient(t, w, d, idx, anchor, mu);
    CHECK(std::abs(lg.loss - oracle_loss(t, w, d, idx, anchor, mu)) < 1e-12);
    const double h = 1e-5;
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      const double fd = (oracle_loss(t, wp, d, idx, anchor, mu) - oracle_loss(t, wm, d, idx, anchor, mu)) / (2 * h);
      worst = std::max(worst, std::abs(fd - lg.grad[k]));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("empty batch is a precondition error") {
  const auto t = small_task();
  const auto d = make_data(t, 2, 1);
  const auto w = t.zero_params();
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(loss_and_gradient(t, w, d, none, w, 0.0), std::invalid_argument);
  LocalDataset empty;
  empty.n_features = t.n_features;
  CHECK_THROWS_AS(local_train(t, w, empty, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("local_train equals an independent SGD implementation") {
  std::mt19937_64 gen(5);
  for (double mu : {0.0, 0.5}) {
    const auto t = small_task(4, 3);
    const auto d = make_data(t, 23, 3);
    TrainConfig cfg;
    cfg.local_epochs = 3;
    cfg.batch_size = 10;
    cfg.learning_rate = 0.1;
    cfg.prox_mu = mu;
    cfg.seed = 77;
    const auto w0 = random_params(t.param_count(), gen);
    const auto got = local_train(t, w0, d, cfg);
    const auto want = oracle_sgd(t, w0, d, cfg);
    REQUIRE(got.params.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(std::abs(got.params[k] - want[k]) < 1e-12);
    CHECK(got.n_samples == d.size());
    CHECK(got.train_loss == dataset_loss(t, got.params, d));
  }
}

TEST_CASE("local_train is deterministic and seed dependent") {
  const auto t = default_task();
  const auto d = make_data(t, 10, 8);
  TrainConfig cfg;
  cfg.seed = 3;
  const auto a = local_train(t, t.zero_params(), d, cfg);
  const auto b = local_train(t, t.zero_params(), d, cfg);
  CHECK(a.params == b.params);
  cfg.seed = 4;
  CHECK(local_train(t, t.zero_params(), d, cfg).params != a.params);
}

TEST_CASE("proximal term limits drift monotonically in mu") {
  const auto t = default_task();
  const auto d = make_data(t, 20, 21);
  std::mt19937_64 gen(1);
  const auto w0 = random_params(t.param_count(), gen, 0.1);
  double prev = 1e300;
  for (double mu : {0.0, 0.1, 1.0, 10.0}) {
    TrainConfig cfg;
    cfg.prox_mu = mu;
    cfg.seed = 9;
    const double drift = l2_distance(local_train(t, w0, d, cfg).params, w0);
    CHECK(drift <= prev);
    prev = drift;
  }
}

TEST_CASE("huge mu keeps the model at the anchor without blowing up") {
  const auto t = default_task();
  const auto d = make_data(t, 10, 2);
  std::mt19937_64 gen(4);
  const auto w0 = random_params(t.param_count(), gen);
  TrainConfig cfg;
  cfg.prox_mu = 1e6;
  cfg.learning_rate = 0.5;
  const auto r = local_train(t, w0, d, cfg);
  CHECK(l2_distance(r.params, w0) < 1e-3);
}

TEST_CASE("small learning rate does not increase the loss") {
  const auto t = default_task();
  const auto d = make_data(t, 25, 17);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  const auto w0 = t.zero_params();
  const double before = dataset_loss(t, w0, d);
  CHECK(local_train(t, w0, d, cfg).train_loss <= before + 1e-9);
}

TEST_CASE("predict breaks ties toward the lowest class") {
  const auto t = small_task(5, 2);
  const auto w = t.zero_params();
  const double x[] = {1.0, -1.0};
  CHECK(predict(t, w, x) == 0);
  auto w2 = w;
  w2[t.n_classes * t.n_features + 3] = 1.0;
  w2[t.n_classes * t.n_features + 4] = 1.0;
  CHECK(predict(t, w2, x) == 3);
}

TEST_CASE("evaluate equals a per-sample argmax recount") {
  std::mt19937_64 gen(8);
  const auto t = default_task();
  const auto d = make_data(t, 30, 31);
  const auto w = random_params(t.param_count(), gen);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::size_t best = 0;
    double best_s = -1e300;
    for (std::size_t c = 0; c < t.n_classes; ++c) {
      double s = w[t.n_classes * t.n_features + c];
      for (std::size_t j = 0; j < t.n_features; ++j) s += w[c * t.n_features + j] * d.features[i * t.n_features + j];
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    hits += best == d.labels[i];
  }
  CHECK(evaluate(t, w, d) == static_cast<double>(hits) / static_cast<double>(d.size()));
}
