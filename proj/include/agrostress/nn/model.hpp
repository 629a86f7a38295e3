#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/dem_stress.hpp"
#include "agrostress/error.hpp"
#include "agrostress/growth.hpp"
#include "agrostress/nn/conv.hpp"
#include "agrostress/nn/mlp.hpp"
#include "agrostress/nn/tensor.hpp"
#include "agrostress/random.hpp"

namespace agrostress::nn {

enum class ModelKind { dem_mlp, cnn_mlp };

inline const char* to_string(ModelKind k) { return k == ModelKind::dem_mlp ? "dem-mlp" : "cnn-mlp"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "dem-mlp" || s == "dem_mlp") return ModelKind::dem_mlp;
  if (s == "cnn-mlp" || s == "cnn_mlp") return ModelKind::cnn_mlp;
  fail(ErrorKind::config, "unknown model kind '" + s + "' (expected dem-mlp or cnn-mlp)");
}

inline const char* to_string(Activation a) { return a == Activation::rbf ? "rbf" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "rbf") return Activation::rbf;
  if (s == "tanh") return Activation::tanh;
  fail(ErrorKind::config, "unknown activation '" + s + "' (expected rbf or tanh)");
}

inline std::vector<int> default_hidden(ModelKind k) {
  return k == ModelKind::cnn_mlp ? std::vector<int>{64, 80, 40} : std::vector<int>{56, 30, 20};
}

// Architecture. For the CNN path d_max is the padded season length; the DEM
// path always works on the 18 growth periods.
struct ModelSpec {
  ModelKind kind = ModelKind::cnn_mlp;
  dem::CombineKind combine = dem::CombineKind::product;
  std::vector<int> hidden = default_hidden(ModelKind::cnn_mlp);
  int filter_height = 15;
  int stride = 12;
  int d_max = 0;
  Activation heat_activation = Activation::rbf;
  Activation drought_activation = Activation::rbf;

  int stress_length() const {
    return kind == ModelKind::dem_mlp ? kNumPeriods : conv_windows(d_max, filter_height, stride);
  }
  int mlp_inputs() const { return 3 * stress_length() + 2; }

  ConvShape conv(StressModule m) const {
    ConvShape s;
    s.rows = d_max;
    s.height = filter_height;
    s.stride = stride;
    s.activation = m == StressModule::heat ? heat_activation : drought_activation;
    return s;
  }
  MlpShape mlp() const { return MlpShape{mlp_inputs(), hidden}; }

  std::size_t conv_params(StressModule m) const {
    return kind == ModelKind::cnn_mlp ? conv(m).param_count() : 0;
  }
  std::size_t heat_offset() const { return 0; }
  std::size_t drought_offset() const { return conv_params(StressModule::heat); }
  std::size_t mlp_offset() const { return drought_offset() + conv_params(StressModule::drought); }
  std::size_t param_count() const { return mlp_offset() + mlp().param_count(); }

  void validate() const {
    if (hidden.empty()) fail(ErrorKind::config, "model needs at least one hidden layer");
    for (int h : hidden)
      if (h <= 0) fail(ErrorKind::config, "hidden layer sizes must be positive");
    if (kind == ModelKind::cnn_mlp) {
      if (filter_height <= 0 || stride <= 0) fail(ErrorKind::config, "filter height and stride must be positive");
      if (d_max < filter_height || (d_max - filter_height) % stride != 0)
        fail(ErrorKind::config, "padded length " + std::to_string(d_max) +
                                    " must be >= the filter height with (d_max - h) divisible by the stride");
    }
  }
};

// Everything needed to reproduce predictions: architecture, the fixed DEM
// parameters, flat trainable parameters and all normalization constants.
struct ModelBundle {
  ModelSpec spec;
  GrowthParams growth;
  dem::DemParams dem;
  std::vector<double> params;
  FeatureStats heat_stats = FeatureStats::identity();
  FeatureStats drought_stats = FeatureStats::identity();
  std::vector<double> input_scale;  // one divisor per stress input (3 * stress_length)
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::vector<std::string> hybrid_ids;
  std::vector<std::string> env_ids;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  bool trained = false;

  std::span<const double> conv_params(StressModule m) const {
    const std::size_t off = m == StressModule::heat ? spec.heat_offset() : spec.drought_offset();
    return std::span<const double>(params).subspan(off, spec.conv_params(m));
  }
  std::span<const double> mlp_params() const {
    return std::span<const double>(params).subspan(spec.mlp_offset(), spec.mlp().param_count());
  }

  std::size_t hybrid_index(const std::string& id) const { return lookup(hybrid_ids, id, "hybrid"); }
  std::size_t env_index(const std::string& id) const { return lookup(env_ids, id, "environment"); }

  // Ids enter the MLP as dense indices min-max scaled to [0, 1].
  double encode_hybrid(std::size_t i) const { return encode(i, hybrid_ids.size(), "hybrid"); }
  double encode_env(std::size_t j) const { return encode(j, env_ids.size(), "environment"); }

 private:
  static std::size_t lookup(const std::vector<std::string>& ids, const std::string& id, const char* what) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) fail(ErrorKind::lookup, std::string("unknown ") + what + " '" + id + "'");
    return static_cast<std::size_t>(it - ids.begin());
  }
  static double encode(std::size_t i, std::size_t n, const char* what) {
    if (i >= n) fail(ErrorKind::lookup, std::string(what) + " index " + std::to_string(i) + " out of range");
    return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
  }
};

// Longest season in the dataset rounded up to a whole number of strides.
inline int dataset_d_max(const Dataset& ds, int filter_height, int stride) {
  std::size_t longest = 0;
  for (const auto& e : ds.environments()) longest = std::max(longest, e.weather.size());
  return padded_days(static_cast<int>(longest), filter_height, stride);
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases, and
// sigma = 2 for RBF filters.
inline void glorot_init(ModelBundle& b, std::uint64_t seed) {
  Rng rng(seed);
  b.params.assign(b.spec.param_count(), 0.0);
  if (b.spec.kind == ModelKind::cnn_mlp) {
    for (auto m : {StressModule::heat, StressModule::drought}) {
      const auto shape = b.spec.conv(m);
      const std::size_t off = m == StressModule::heat ? b.spec.heat_offset() : b.spec.drought_offset();
      const double fan_in = static_cast<double>(shape.filter_size());
      const double limit = std::sqrt(6.0 / (fan_in + 1.0));
      for (std::size_t k = 0; k < shape.filter_size(); ++k) b.params[off + k] = uniform(rng, -limit, limit);
      if (shape.activation == Activation::rbf) b.params[off + shape.filter_size() + 1] = std::log(2.0);
    }
  }
  const auto mlp = b.spec.mlp();
  for (std::size_t l = 0; l < mlp.layers(); ++l) {
    const int in = mlp.layer_in(l);
    const int out = mlp.layer_out(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    const std::size_t off = b.spec.mlp_offset() + mlp.layer_offset(l);
    for (std::size_t k = 0; k < static_cast<std::size_t>(in) * static_cast<std::size_t>(out); ++k)
      b.params[off + k] = uniform(rng, -limit, limit);
  }
}

// A fresh, untrained bundle whose id tables and padded length come from ds.
inline ModelBundle init_model(ModelSpec spec, const Dataset& ds, const GrowthParams& growth,
                              const dem::DemParams& dem_params, std::uint64_t seed) {
  if (spec.kind == ModelKind::cnn_mlp && spec.d_max == 0)
    spec.d_max = dataset_d_max(ds, spec.filter_height, spec.stride);
  spec.validate();
  dem_params.validate();
  ModelBundle b;
  b.spec = std::move(spec);
  b.growth = growth;
  b.dem = dem_params;
  b.dem.combine = b.spec.combine;
  b.hybrid_ids = ds.hybrid_ids();
  b.env_ids = ds.env_ids();
  b.seed = seed;
  b.input_scale.assign(static_cast<std::size_t>(3 * b.spec.stress_length()), 1.0);
  glorot_init(b, seed);
  return b;
}

// Model inputs precomputed for one dataset: normalized tensors per
// environment (CNN) or DEM period vectors per instance, plus the bundle's
// id indices for every instance.
struct PreparedData {
  std::vector<InstanceTensor> heat, drought;  // by dataset environment
  std::vector<std::vector<double>> dem;       // per instance: S_H, S_D, S_HD (3 x 18)
  std::vector<std::size_t> env_local;         // dataset environment of each instance
  std::vector<std::size_t> hybrid, env;       // bundle indices of each instance

  std::size_t size() const { return hybrid.size(); }
};

inline PreparedData prepare(const ModelBundle& b, const Dataset& ds, const std::vector<GrowthCalendar>& calendars) {
  if (calendars.size() != ds.num_environments()) fail(ErrorKind::alignment, "one calendar per environment required");
  PreparedData pd;
  const std::size_t n = ds.num_instances();
  pd.env_local.resize(n);
  pd.hybrid.resize(n);
  pd.env.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = ds.instances()[i];
    pd.env_local[i] = ds.env_of(i);
    pd.hybrid[i] = b.hybrid_index(inst.hybrid_id);
    pd.env[i] = b.env_index(inst.env_id);
  }
  if (b.spec.kind == ModelKind::cnn_mlp) {
    for (std::size_t e = 0; e < ds.num_environments(); ++e) {
      const auto& env = ds.environments()[e];
      pd.heat.push_back(build_instance_tensor(env, calendars[e], StressModule::heat, b.spec.d_max, b.heat_stats));
      pd.drought.push_back(
          build_instance_tensor(env, calendars[e], StressModule::drought, b.spec.d_max, b.drought_stats));
    }
  } else {
    const auto stresses = dem::instance_stresses(ds, calendars, b.dem);
    pd.dem.reserve(n);
    for (const auto& s : stresses) {
      std::vector<double> v;
      v.reserve(3 * kNumPeriods);
      v.insert(v.end(), s.heat.begin(), s.heat.end());
      v.insert(v.end(), s.drought.begin(), s.drought.end());
      v.insert(v.end(), s.combined.begin(), s.combined.end());
      pd.dem.push_back(std::move(v));
    }
  }
  return pd;
}

inline PreparedData prepare(const ModelBundle& b, const Dataset& ds) {
  return prepare(b, ds, build_calendars(ds, b.growth));
}

struct ForwardState {
  ConvCache heat, drought;
  std::vector<double> stress;  // S_H, S_D, S_HD concatenated (3L)
  std::vector<double> input;   // scaled MLP input (3L + 2)
  MlpCache mlp;
  double output = 0.0;      // standardized output
  double prediction = 0.0;  // in yield units
};

// Stress vectors plus encoded ids through the MLP, then back to yield units.
inline double head_forward(const ModelBundle& b, std::span<const double> stress, double hybrid_code, double env_code,
                           ForwardState& st) {
  const std::size_t k = stress.size();
  if (k != b.input_scale.size()) fail(ErrorKind::shape, "stress vector length does not match the model");
  st.input.resize(k + 2);
  for (std::size_t t = 0; t < k; ++t) st.input[t] = stress[t] / b.input_scale[t];
  st.input[k] = hybrid_code;
  st.input[k + 1] = env_code;
  st.output = mlp_forward(b.spec.mlp(), b.mlp_params(), st.input, st.mlp);
  st.prediction = b.target_mean + b.target_scale * st.output;
  return st.prediction;
}

inline void stress_forward(const ModelBundle& b, const PreparedData& pd, std::size_t i, ForwardState& st) {
  const std::size_t len = static_cast<std::size_t>(b.spec.stress_length());
  if (b.spec.kind == ModelKind::dem_mlp) {
    st.stress = pd.dem[i];
    return;
  }
  const std::size_t e = pd.env_local[i];
  conv_forward(b.spec.conv(StressModule::heat), b.conv_params(StressModule::heat), pd.heat[e].values, st.heat);
  conv_forward(b.spec.conv(StressModule::drought), b.conv_params(StressModule::drought), pd.drought[e].values,
               st.drought);
  st.stress.resize(3 * len);
  for (std::size_t t = 0; t < len; ++t) {
    st.stress[t] = st.heat.s[t];
    st.stress[len + t] = st.drought.s[t];
    st.stress[2 * len + t] = dem::s_combined(st.heat.s[t], st.drought.s[t], b.spec.combine);
  }
}

inline double forward(const ModelBundle& b, const PreparedData& pd, std::size_t i, ForwardState& st) {
  if (i >= pd.size()) fail(ErrorKind::index, "instance index " + std::to_string(i) + " out of range");
  stress_forward(b, pd, i, st);
  return head_forward(b, st.stress, b.encode_hybrid(pd.hybrid[i]), b.encode_env(pd.env[i]), st);
}

inline double predict(const ModelBundle& b, const PreparedData& pd, std::size_t i) {
  ForwardState st;
  return forward(b, pd, i, st);
}

inline std::vector<double> predict_all(const ModelBundle& b, const PreparedData& pd) {
  std::vector<double> out(pd.size());
  ForwardState st;
  for (std::size_t i = 0; i < pd.size(); ++i) out[i] = forward(b, pd, i, st);
  return out;
}

// Accumulates d(loss)/d(params) into grad given d(loss)/d(standardized output).
// On the DEM path only MLP entries are touched.
inline void backward(const ModelBundle& b, const PreparedData& pd, std::size_t i, const ForwardState& st,
                     double d_output, std::span<double> grad) {
  const auto mlp = b.spec.mlp();
  std::vector<double> d_in(static_cast<std::size_t>(mlp.inputs));
  mlp_backward(mlp, b.mlp_params(), st.mlp, d_output, grad.subspan(b.spec.mlp_offset(), mlp.param_count()), d_in);
  if (b.spec.kind == ModelKind::dem_mlp) return;
  const std::size_t len = static_cast<std::size_t>(b.spec.stress_length());
  std::vector<double> d_h(len), d_d(len);
  for (std::size_t t = 0; t < len; ++t) {
    const double g_hd = d_in[2 * len + t] / b.input_scale[2 * len + t];
    const auto g = dem::s_combined_grad(st.heat.s[t], st.drought.s[t], b.spec.combine);
    d_h[t] = d_in[t] / b.input_scale[t] + g_hd * g[0];
    d_d[t] = d_in[len + t] / b.input_scale[len + t] + g_hd * g[1];
  }
  const std::size_t e = pd.env_local[i];
  conv_backward(b.spec.conv(StressModule::heat), b.conv_params(StressModule::heat), pd.heat[e].values, st.heat, d_h,
                grad.subspan(b.spec.heat_offset(), b.spec.conv_params(StressModule::heat)));
  conv_backward(b.spec.conv(StressModule::drought), b.conv_params(StressModule::drought), pd.drought[e].values,
                st.drought, d_d, grad.subspan(b.spec.drought_offset(), b.spec.conv_params(StressModule::drought)));
}

// d(prediction)/d(S_H_t), d/d(S_D_t), d/d(S_HD_t) with the three stress
// vectors as independent MLP inputs.
struct StressGradient {
  std::vector<double> heat, drought, combined;
};

inline StressGradient stress_gradient(const ModelBundle& b, const PreparedData& pd, std::size_t i) {
  ForwardState st;
  forward(b, pd, i, st);
  const auto mlp = b.spec.mlp();
  std::vector<double> d_in(static_cast<std::size_t>(mlp.inputs));
  mlp_backward(mlp, b.mlp_params(), st.mlp, 1.0, {}, d_in);
  const std::size_t len = static_cast<std::size_t>(b.spec.stress_length());
  StressGradient g;
  g.heat.resize(len);
  g.drought.resize(len);
  g.combined.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    g.heat[t] = b.target_scale * d_in[t] / b.input_scale[t];
    g.drought[t] = b.target_scale * d_in[len + t] / b.input_scale[len + t];
    g.combined[t] = b.target_scale * d_in[2 * len + t] / b.input_scale[2 * len + t];
  }
  return g;
}

}  // namespace agrostress::nn
