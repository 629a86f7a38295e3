#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace agrostress::nn {

// ADADELTA: per-coordinate step sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g,
// with both running averages decayed by rho.
class Adadelta {
 public:
  Adadelta(std::size_t n, double rho = 0.95, double epsilon = 1e-6)
      : rho_(rho), eps_(epsilon), eg2_(n, 0.0), edx2_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      eg2_[i] = rho_ * eg2_[i] + (1.0 - rho_) * g * g;
      const double dx = -std::sqrt(edx2_[i] + eps_) / std::sqrt(eg2_[i] + eps_) * g;
      edx2_[i] = rho_ * edx2_[i] + (1.0 - rho_) * dx * dx;
      params[i] += dx;
    }
  }

  void reset() {
    std::fill(eg2_.begin(), eg2_.end(), 0.0);
    std::fill(edx2_.begin(), edx2_.end(), 0.0);
  }

 private:
  double rho_;
  double eps_;
  std::vector<double> eg2_;
  std::vector<double> edx2_;
};

}  // namespace agrostress::nn
