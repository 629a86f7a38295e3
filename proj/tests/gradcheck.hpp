#pragma once

// Finite-difference check of every parameter gradient and every
// stress-input gradient of a model, shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "agrostress/nn/model.hpp"
#include "agrostress/nn/train.hpp"
#include "agrostress/synth.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace agrostress;

struct Report {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // the +-h evaluations switched a ReLU
  double max_param_error = 0.0;
  double max_stress_error = 0.0;
  // Worst error when each comparison above 1e-6 keeps the better of steps h
  // and h / 10. Separates truncation error of the difference from a wrong
  // derivative.
  double max_error_tenth_step = 0.0;

  double max_error() const { return std::max(max_param_error, max_stress_error); }
  void merge(const Report& r) {
    checked += r.checked;
    skipped_kinks += r.skipped_kinks;
    max_param_error = std::max(max_param_error, r.max_param_error);
    max_stress_error = std::max(max_stress_error, r.max_stress_error);
    max_error_tenth_step = std::max(max_error_tenth_step, r.max_error_tenth_step);
  }
};

inline std::vector<bool> relu_pattern(const nn::ForwardState& st) {
  std::vector<bool> p;
  for (std::size_t l = 1; l < st.mlp.act.size(); ++l)
    for (double v : st.mlp.act[l]) p.push_back(v > 0.0);
  return p;
}

inline SynthConfig small_world() {
  SynthConfig c;
  c.n_hybrids = 6;
  c.n_envs = 4;
  c.instances_per_hybrid = 3;
  c.season_length = 40;
  c.season_jitter = 6;
  return c;
}

// A briefly trained model: normalization constants are fitted exactly as in
// a real run, and every parameter is moved off its initial value.
inline nn::ModelBundle random_model(nn::ModelKind kind, const Dataset& ds, std::uint64_t seed, bool full_sizes) {
  std::mt19937_64 rng(seed);
  nn::ModelSpec spec;
  spec.kind = kind;
  spec.hidden = full_sizes ? nn::default_hidden(kind) : std::vector<int>{7, 5, 4};
  spec.filter_height = 15;
  spec.stride = 12;
  const dem::CombineKind combos[] = {dem::CombineKind::product, dem::CombineKind::sum, dem::CombineKind::exp_product,
                                     dem::CombineKind::exp_sum};
  spec.combine = combos[seed % 4];
  spec.heat_activation = (seed % 2) ? nn::Activation::tanh : nn::Activation::rbf;
  spec.drought_activation = (seed % 3) ? nn::Activation::rbf : nn::Activation::tanh;
  dem::DemParams dp;
  dp.drought.freeze_ksat_bounds(ds);
  const GrowthParams g{10.0, GduMode::mean_variant, true};
  auto b = nn::init_model(spec, ds, g, dp, seed);
  std::normal_distribution<double> n01(0.0, 0.3);
  for (auto& p : b.params)
    if (p == 0.0) p = n01(rng);
  std::vector<double> y;
  for (const auto& inst : ds.instances()) y.push_back(inst.yield_obs);
  nn::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = seed;
  nn::train(b, ds, y, cfg);
  return b;
}

// Compares analytic against central-difference gradients for instance i.
inline Report check_instance(nn::ModelBundle& b, const nn::PreparedData& pd, std::size_t i, double h = 1e-4) {
  Report r;
  nn::ForwardState st;
  nn::forward(b, pd, i, st);
  const auto base_pattern = relu_pattern(st);
  std::vector<double> grad(b.params.size(), 0.0);
  nn::backward(b, pd, i, st, 1.0, grad);

  nn::ForwardState probe;
  const auto eval_params = [&] { return nn::forward(b, pd, i, probe), probe.output; };
  for (std::size_t k = 0; k < b.params.size(); ++k) {
    const double keep = b.params[k];
    b.params[k] = keep + h;
    nn::forward(b, pd, i, probe);
    const auto up_pattern = relu_pattern(probe);
    b.params[k] = keep - h;
    nn::forward(b, pd, i, probe);
    const auto down_pattern = relu_pattern(probe);
    b.params[k] = keep;
    if (up_pattern != base_pattern || down_pattern != base_pattern) {
      ++r.skipped_kinks;
      continue;
    }
    const double fd = oracle::central_difference(b.params, k, h, eval_params);
    double err = oracle::relative_error(grad[k], fd);
    r.max_param_error = std::max(r.max_param_error, err);
    if (err > 1e-6)
      err = std::min(err, oracle::relative_error(grad[k], oracle::central_difference(b.params, k, h / 10, eval_params)));
    r.max_error_tenth_step = std::max(r.max_error_tenth_step, err);
    ++r.checked;
  }

  const auto g = nn::stress_gradient(b, pd, i);
  std::vector<double> stress = st.stress;
  const double hc = b.encode_hybrid(pd.hybrid[i]);
  const double ec = b.encode_env(pd.env[i]);
  const auto eval_stress = [&] { return nn::head_forward(b, stress, hc, ec, probe); };
  const std::size_t len = g.heat.size();
  for (std::size_t k = 0; k < stress.size(); ++k) {
    const double analytic = k < len ? g.heat[k] : (k < 2 * len ? g.drought[k - len] : g.combined[k - 2 * len]);
    const double step = h;
    const double keep = stress[k];
    stress[k] = keep + step;
    nn::head_forward(b, stress, hc, ec, probe);
    const auto up_pattern = relu_pattern(probe);
    stress[k] = keep - step;
    nn::head_forward(b, stress, hc, ec, probe);
    const auto down_pattern = relu_pattern(probe);
    stress[k] = keep;
    if (up_pattern != base_pattern || down_pattern != base_pattern) {
      ++r.skipped_kinks;
      continue;
    }
    const double fd = oracle::central_difference(stress, k, step, eval_stress);
    double err = oracle::relative_error(analytic, fd);
    r.max_stress_error = std::max(r.max_stress_error, err);
    if (err > 1e-6)
      err = std::min(err, oracle::relative_error(analytic, oracle::central_difference(stress, k, step / 10, eval_stress)));
    r.max_error_tenth_step = std::max(r.max_error_tenth_step, err);
    ++r.checked;
  }
  return r;
}

// models x instances random checks for one model kind.
inline Report run(nn::ModelKind kind, int models, int instances, bool full_sizes, std::uint64_t seed0 = 100) {
  Report total;
  for (int m = 0; m < models; ++m) {
    const auto ds = generate_synthetic(small_world(), seed0 + static_cast<std::uint64_t>(m)).dataset;
    auto b = random_model(kind, ds, seed0 + static_cast<std::uint64_t>(m), full_sizes);
    const auto pd = nn::prepare(b, ds);
    std::mt19937_64 rng(seed0 * 31 + static_cast<std::uint64_t>(m));
    for (int k = 0; k < instances; ++k) total.merge(check_instance(b, pd, rng() % ds.num_instances()));
  }
  return total;
}

}  // namespace gradcheck
