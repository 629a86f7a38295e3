#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "agrostress/error.hpp"
#include "agrostress/nn/tensor.hpp"

namespace agrostress::nn {

enum class Activation { rbf, tanh };

// A single filter of height x width sliding along the day axis.
//
// Parameter layout: filter weights (row-major, height x width), bias, and for
// the RBF activation one more entry holding log(sigma). Storing the log keeps
// sigma positive under unconstrained updates.
struct ConvShape {
  int rows = 0;  // padded days
  int width = kNumFeatures;
  int height = 15;
  int stride = 12;
  Activation activation = Activation::rbf;

  int windows() const { return conv_windows(rows, height, stride); }
  std::size_t filter_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t param_count() const { return filter_size() + 1 + (activation == Activation::rbf ? 1 : 0); }
};

struct ConvCache {
  std::vector<double> z;  // pre-activations
  std::vector<double> s;  // outputs
};

inline double conv_sigma(const ConvShape& shape, std::span<const double> params) {
  return shape.activation == Activation::rbf ? std::exp(params[shape.filter_size() + 1]) : 1.0;
}

inline void conv_forward(const ConvShape& shape, std::span<const double> params, std::span<const double> x,
                         ConvCache& cache) {
  if (x.size() != static_cast<std::size_t>(shape.rows) * shape.width)
    fail(ErrorKind::shape, "conv input has " + std::to_string(x.size()) + " values, expected " +
                               std::to_string(static_cast<std::size_t>(shape.rows) * shape.width));
  if (params.size() != shape.param_count()) fail(ErrorKind::shape, "conv parameter count mismatch");
  const int t_count = shape.windows();
  cache.z.resize(static_cast<std::size_t>(t_count));
  cache.s.resize(static_cast<std::size_t>(t_count));
  const std::size_t fs = shape.filter_size();
  const double bias = params[fs];
  const double sigma = conv_sigma(shape, params);
  const double inv_s2 = 1.0 / (sigma * sigma);
  for (int t = 0; t < t_count; ++t) {
    const double* win = x.data() + static_cast<std::size_t>(t) * shape.stride * shape.width;
    double z = bias;
    for (std::size_t k = 0; k < fs; ++k) z += params[k] * win[k];
    cache.z[static_cast<std::size_t>(t)] = z;
    cache.s[static_cast<std::size_t>(t)] = shape.activation == Activation::rbf ? std::exp(-z * z * inv_s2) : std::tanh(z);
  }
}

// Accumulates d(loss)/d(params) given d(loss)/d(outputs).
inline void conv_backward(const ConvShape& shape, std::span<const double> params, std::span<const double> x,
                          const ConvCache& cache, std::span<const double> d_s, std::span<double> d_params) {
  const std::size_t fs = shape.filter_size();
  const double sigma = conv_sigma(shape, params);
  const double inv_s2 = 1.0 / (sigma * sigma);
  double d_log_sigma = 0.0;
  for (std::size_t t = 0; t < cache.z.size(); ++t) {
    const double z = cache.z[t];
    const double s = cache.s[t];
    double dz;
    if (shape.activation == Activation::rbf) {
      dz = d_s[t] * (-2.0 * z * inv_s2 * s);
      d_log_sigma += d_s[t] * (2.0 * z * z * inv_s2 * s);
    } else {
      dz = d_s[t] * (1.0 - s * s);
    }
    if (dz == 0.0) continue;
    const double* win = x.data() + t * static_cast<std::size_t>(shape.stride) * shape.width;
    for (std::size_t k = 0; k < fs; ++k) d_params[k] += dz * win[k];
    d_params[fs] += dz;
  }
  if (shape.activation == Activation::rbf) d_params[fs + 1] += d_log_sigma;
}

}  // namespace agrostress::nn
