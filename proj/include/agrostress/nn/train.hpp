#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/error.hpp"
#include "agrostress/nn/adadelta.hpp"
#include "agrostress/nn/model.hpp"
#include "agrostress/parallel.hpp"
#include "agrostress/random.hpp"

namespace agrostress::nn {

struct TrainConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  int batch_size = 64;
  int epochs = 200;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
  int threads = 1;

  void validate() const {
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorKind::config, "train.rho must lie in (0, 1)");
    if (!(epsilon > 0.0)) fail(ErrorKind::config, "train.epsilon must be positive");
    if (batch_size < 1) fail(ErrorKind::config, "train.batch_size must be >= 1");
    if (epochs < 0) fail(ErrorKind::config, "train.epochs must be >= 0");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorKind::config, "train.test_fraction must lie in (0, 1)");
    if (threads < 1) fail(ErrorKind::config, "threads must be >= 1");
  }
};

struct Split {
  std::vector<std::size_t> train, test;
};

// Seeded uniform split of instance indices; both halves sorted.
inline Split make_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n)));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n)), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  if (s.train.empty() || s.test.empty())
    fail(ErrorKind::config, "train/test split of " + std::to_string(n) + " instances leaves an empty side");
  return s;
}

struct EpochMetrics {
  int epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_mse_over_sigma = 0.0;  // test MSE divided by the test-split variance of the target
};

struct TrainResult {
  Split split;
  std::vector<EpochMetrics> history;  // history[0] is the untrained model
};

inline double mean_squared_error(std::span<const double> pred, std::span<const double> y,
                                 const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return s / static_cast<double>(idx.size());
}

inline double population_variance(std::span<const double> y, const std::vector<std::size_t>& idx) {
  double m = 0.0;
  for (auto i : idx) m += y[i];
  m /= static_cast<double>(idx.size());
  double v = 0.0;
  for (auto i : idx) v += (y[i] - m) * (y[i] - m);
  return v / static_cast<double>(idx.size());
}

// Fits normalization constants on the training split: z-score feature
// statistics (CNN) or per-input RMS scales (DEM), and the target mean/std.
inline void fit_normalization(ModelBundle& b, const Dataset& ds, const std::vector<GrowthCalendar>& calendars,
                              std::span<const double> targets, const std::vector<std::size_t>& train) {
  double m = 0.0;
  for (auto i : train) m += targets[i];
  m /= static_cast<double>(train.size());
  double v = 0.0;
  for (auto i : train) v += (targets[i] - m) * (targets[i] - m);
  const double sd = std::sqrt(v / static_cast<double>(train.size()));
  b.target_mean = m;
  b.target_scale = sd > 1e-12 ? sd : 1.0;
  b.input_scale.assign(static_cast<std::size_t>(3 * b.spec.stress_length()), 1.0);
  if (b.spec.kind == ModelKind::cnn_mlp) {
    b.heat_stats = compute_feature_stats(ds, calendars, train, StressModule::heat);
    b.drought_stats = compute_feature_stats(ds, calendars, train, StressModule::drought);
  }
}

inline void fit_dem_input_scale(ModelBundle& b, const PreparedData& pd, const std::vector<std::size_t>& train) {
  if (b.spec.kind != ModelKind::dem_mlp) return;
  for (std::size_t k = 0; k < b.input_scale.size(); ++k) {
    double s = 0.0;
    for (auto i : train) s += pd.dem[i][k] * pd.dem[i][k];
    const double rms = std::sqrt(s / static_cast<double>(train.size()));
    b.input_scale[k] = rms > 1e-12 ? rms : 1.0;
  }
}

// Minimizes the mean squared error of the predicted delta yield with
// mini-batch ADADELTA. Per-instance gradients may be computed on several
// threads but are always summed in index order, so the trained parameters
// do not depend on the thread count.
inline TrainResult train(ModelBundle& b, const Dataset& ds, std::span<const double> targets, const TrainConfig& cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  if (targets.size() != ds.num_instances())
    fail(ErrorKind::alignment, "one target per planting instance required");
  TrainResult result;
  result.split = make_split(ds.num_instances(), cfg.test_fraction, cfg.seed);
  const auto& split = result.split;

  const auto calendars = build_calendars(ds, b.growth);
  fit_normalization(b, ds, calendars, targets, split.train);
  const PreparedData pd = prepare(b, ds, calendars);
  fit_dem_input_scale(b, pd, split.train);

  const double test_var = population_variance(targets, split.test);
  const std::size_t n_params = b.params.size();
  Adadelta opt(n_params, cfg.rho, cfg.epsilon);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<double> pred(ds.num_instances());
  const auto evaluate = [&](int epoch) {
    parallel_for(pred.size(), cfg.threads, [&](std::size_t i) { pred[i] = predict(b, pd, i); });
    EpochMetrics m;
    m.epoch = epoch;
    m.train_mse = mean_squared_error(pred, targets, split.train);
    m.test_mse = mean_squared_error(pred, targets, split.test);
    m.test_mse_over_sigma = test_var > 0.0 ? m.test_mse / test_var : (m.test_mse == 0.0 ? 0.0 : INFINITY);
    if (!std::isfinite(m.train_mse) || !std::isfinite(m.test_mse))
      fail(ErrorKind::divergence, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  };

  evaluate(0);
  std::vector<std::size_t> order = split.train;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<double>> local(batch, std::vector<double>(n_params));
  std::vector<double> grad(n_params);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      parallel_for(count, cfg.threads, [&](std::size_t k) {
        auto& g = local[k];
        std::fill(g.begin(), g.end(), 0.0);
        const std::size_t i = order[start + k];
        ForwardState st;
        forward(b, pd, i, st);
        const double y = (targets[i] - b.target_mean) / b.target_scale;
        backward(b, pd, i, st, 2.0 * (st.output - y), g);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = 0; k < count; ++k)
        for (std::size_t p = 0; p < n_params; ++p) grad[p] += local[k][p];
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : grad) g *= inv;
      opt.step(b.params, grad);
    }
    evaluate(epoch);
  }
  b.trained = true;
  b.seed = cfg.seed;
  b.test_fraction = cfg.test_fraction;
  return result;
}

}  // namespace agrostress::nn
