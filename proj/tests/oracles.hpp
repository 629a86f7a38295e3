#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library code it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double s_heat(double t, double t2, double t3) { return clamp01((t - t2) / (t3 - t2)); }

inline double s_cold(double t, double t0, double t1) { return 1.0 - clamp01((t - t0) / (t1 - t0)); }

// One minus the trapezoid, case by case.
inline double s_temp(double t, double t0, double t1, double t2, double t3) {
  double trapezoid = 0.0;
  if (t <= t0 || t >= t3)
    trapezoid = 0.0;
  else if (t < t1)
    trapezoid = (t - t0) / (t1 - t0);
  else if (t <= t2)
    trapezoid = 1.0;
  else
    trapezoid = (t3 - t) / (t3 - t2);
  return 1.0 - trapezoid;
}

// Run-length factor applied day by day: a day's run is found by scanning
// left and right from it.
inline std::vector<double> s_heat_accumulated(const std::vector<double>& s, double a0, double a1) {
  std::vector<double> out(s.size(), 0.0);
  for (std::size_t d = 0; d < s.size(); ++d) {
    if (!(s[d] > 0.0)) continue;
    std::size_t lo = d, hi = d;
    while (lo > 0 && s[lo - 1] > 0.0) --lo;
    while (hi + 1 < s.size() && s[hi + 1] > 0.0) ++hi;
    out[d] = s[d] * (a0 + a1 * static_cast<double>(hi - lo + 1));
  }
  return out;
}

inline double s_drought(double mad, double aw, int irr, double q) {
  return std::max(0.0, (mad - aw) * (1.0 - q * irr));
}

// Group-by sum keyed on the period label.
inline std::array<double, 18> group_sum(const std::vector<double>& daily, const std::vector<int>& period) {
  std::map<int, std::vector<double>> groups;
  for (std::size_t d = 0; d < daily.size(); ++d) groups[period[d]].push_back(daily[d]);
  std::array<double, 18> out{};
  for (const auto& [p, values] : groups) {
    double s = 0.0;
    for (double v : values) s += v;
    out[static_cast<std::size_t>(p)] = s;
  }
  return out;
}

// Population covariance by the textbook two-pass formula.
inline double covariance(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) c += (x[i] - mx) * (y[i] - my);
  return c / static_cast<double>(n);
}

// Central difference of f around x[k], restoring x afterwards.
inline double central_difference(std::vector<double>& x, std::size_t k, double h,
                                 const std::function<double()>& f) {
  const double keep = x[k];
  x[k] = keep + h;
  const double up = f();
  x[k] = keep - h;
  const double down = f();
  x[k] = keep;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Spearman correlation via Pearson on positions.
inline double spearman(const std::vector<double>& pa, const std::vector<double>& pb) {
  const std::size_t n = pa.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += pa[i];
    mb += pb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (pa[i] - ma) * (pb[i] - mb);
    saa += (pa[i] - ma) * (pa[i] - ma);
    sbb += (pb[i] - mb) * (pb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Fraction of labels matching truth under the better of the two
// assignments of a binary labelling.
inline double binary_accuracy(const std::vector<int>& labels, const std::vector<int>& truth) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) same += (labels[i] == truth[i]) ? 1 : 0;
  const double a = static_cast<double>(same) / static_cast<double>(labels.size());
  return std::max(a, 1.0 - a);
}

}  // namespace oracle
