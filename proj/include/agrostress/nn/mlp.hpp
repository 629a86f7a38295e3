#pragma once

#include <span>
#include <string>
#include <vector>

#include "agrostress/error.hpp"

namespace agrostress::nn {

// Fully connected ReLU layers followed by a linear scalar head.
// Each layer stores its weights row-major (outputs x inputs) then its biases.
struct MlpShape {
  int inputs = 0;
  std::vector<int> hidden;

  int layer_in(std::size_t l) const { return l == 0 ? inputs : hidden[l - 1]; }
  int layer_out(std::size_t l) const { return l < hidden.size() ? hidden[l] : 1; }
  std::size_t layers() const { return hidden.size() + 1; }

  std::size_t layer_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k)
      off += static_cast<std::size_t>(layer_in(k) + 1) * static_cast<std::size_t>(layer_out(k));
    return off;
  }
  std::size_t param_count() const { return layer_offset(layers()); }
};

struct MlpCache {
  std::vector<std::vector<double>> act;  // act[0] = input, act[l] = output of hidden layer l
  double output = 0.0;
};

inline double mlp_forward(const MlpShape& shape, std::span<const double> params, std::span<const double> input,
                          MlpCache& cache) {
  if (input.size() != static_cast<std::size_t>(shape.inputs))
    fail(ErrorKind::shape, "MLP expects " + std::to_string(shape.inputs) + " inputs, got " + std::to_string(input.size()));
  const std::size_t n_layers = shape.layers();
  cache.act.resize(n_layers);
  cache.act[0].assign(input.begin(), input.end());
  double out = 0.0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = shape.layer_in(l);
    const int o = shape.layer_out(l);
    const double* w = params.data() + shape.layer_offset(l);
    const double* b = w + static_cast<std::size_t>(in) * o;
    const auto& x = cache.act[l];
    if (l + 1 < n_layers) {
      auto& y = cache.act[l + 1];
      y.resize(static_cast<std::size_t>(o));
      for (int r = 0; r < o; ++r) {
        double z = b[r];
        const double* wr = w + static_cast<std::size_t>(r) * in;
        for (int c = 0; c < in; ++c) z += wr[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = z > 0.0 ? z : 0.0;
      }
    } else {
      double z = b[0];
      for (int c = 0; c < in; ++c) z += w[c] * x[static_cast<std::size_t>(c)];
      out = z;
    }
  }
  cache.output = out;
  return out;
}

// Given d(loss)/d(output), accumulates parameter gradients into d_params
// (when non-empty) and writes input gradients into d_input (when non-empty).
inline void mlp_backward(const MlpShape& shape, std::span<const double> params, const MlpCache& cache, double d_out,
                         std::span<double> d_params, std::span<double> d_input) {
  const std::size_t n_layers = shape.layers();
  std::vector<double> delta{d_out};  // gradient w.r.t. the current layer's pre-activation
  std::vector<double> prev;
  for (std::size_t l = n_layers; l-- > 0;) {
    const int in = shape.layer_in(l);
    const int o = shape.layer_out(l);
    const std::size_t off = shape.layer_offset(l);
    const double* w = params.data() + off;
    const auto& x = cache.act[l];
    if (!d_params.empty()) {
      double* dw = d_params.data() + off;
      double* db = dw + static_cast<std::size_t>(in) * o;
      for (int r = 0; r < o; ++r) {
        const double dr = delta[static_cast<std::size_t>(r)];
        if (dr == 0.0) continue;
        double* dwr = dw + static_cast<std::size_t>(r) * in;
        for (int c = 0; c < in; ++c) dwr[c] += dr * x[static_cast<std::size_t>(c)];
        db[r] += dr;
      }
    }
    if (l == 0 && d_input.empty()) break;
    prev.assign(static_cast<std::size_t>(in), 0.0);
    for (int r = 0; r < o; ++r) {
      const double dr = delta[static_cast<std::size_t>(r)];
      if (dr == 0.0) continue;
      const double* wr = w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) prev[static_cast<std::size_t>(c)] += dr * wr[c];
    }
    if (l == 0) {
      for (int c = 0; c < in; ++c) d_input[static_cast<std::size_t>(c)] = prev[static_cast<std::size_t>(c)];
      break;
    }
    // Through the ReLU of the previous hidden layer.
    for (int c = 0; c < in; ++c)
      if (!(x[static_cast<std::size_t>(c)] > 0.0)) prev[static_cast<std::size_t>(c)] = 0.0;
    delta.swap(prev);
  }
}

}  // namespace agrostress::nn
