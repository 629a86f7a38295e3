#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/error.hpp"

namespace agrostress {

inline constexpr int kNumPeriods = 18;

enum class GduMode {
  as_written,   // (tmax - tmin) / 2 - t_base
  mean_variant  // (tmax + tmin) / 2 - t_base
};

inline const char* to_string(GduMode m) { return m == GduMode::as_written ? "as_written" : "mean_variant"; }

inline GduMode parse_gdu_mode(const std::string& s) {
  if (s == "as_written") return GduMode::as_written;
  if (s == "mean_variant") return GduMode::mean_variant;
  fail(ErrorKind::config, "unknown gdu mode '" + s + "' (expected as_written or mean_variant)");
}

struct GrowthParams {
  double t_base = 10.0;
  GduMode mode = GduMode::as_written;
  bool clamp = true;
};

inline double daily_gdu(double tmax, double tmin, double t_base, GduMode mode = GduMode::as_written,
                        bool clamp = true) {
  if (tmin > tmax) fail(ErrorKind::domain, "daily_gdu: tmin > tmax");
  const double v = (mode == GduMode::as_written ? (tmax - tmin) : (tmax + tmin)) / 2.0 - t_base;
  return clamp && v < 0.0 ? 0.0 : v;
}

// Normalised accumulated-GDU boundaries of the 18 growth periods. Period i
// covers (b[i], b[i+1]]; an AGDU of exactly 0 belongs to period 0.
class PeriodPartition {
 public:
  static constexpr std::array<double, kNumPeriods + 1> kDefaultBoundaries{
      0.0,       0.023111,  0.04411,   0.085111,  0.1075111, 0.1231111, 0.1334111,
      0.1531111, 0.1635111, 0.1660111, 0.1925111, 0.22111,   0.27111,   0.3111,
      0.4111,    0.6111,    0.8111,    0.9111,    1.0};

  PeriodPartition() : b_(kDefaultBoundaries) {}

  explicit PeriodPartition(const std::array<double, kNumPeriods + 1>& boundaries) : b_(boundaries) {
    if (b_.front() != 0.0 || b_.back() != 1.0) fail(ErrorKind::parameter, "partition must span [0, 1]");
    for (int i = 0; i < kNumPeriods; ++i)
      if (!(b_[i] < b_[i + 1])) fail(ErrorKind::parameter, "partition boundaries must be strictly increasing");
  }

  const std::array<double, kNumPeriods + 1>& boundaries() const { return b_; }
  double lower(int period) const { return b_.at(period); }
  double upper(int period) const { return b_.at(period + 1); }

  int period_of(double agdu) const {
    if (agdu <= 0.0) return 0;
    auto it = std::lower_bound(b_.begin() + 1, b_.end(), agdu);
    if (it == b_.end()) return kNumPeriods - 1;
    return static_cast<int>(it - (b_.begin() + 1));
  }

 private:
  std::array<double, kNumPeriods + 1> b_;
};

struct GrowthCalendar {
  std::vector<double> gdu;
  std::vector<double> agdu;
  std::vector<int> period;
  double t_base = 10.0;

  std::size_t days() const { return gdu.size(); }
};

inline GrowthCalendar build_calendar(const Environment& env, const GrowthParams& params = {},
                                     const PeriodPartition& partition = {}) {
  if (env.weather.empty()) fail(ErrorKind::degenerate, "environment '" + env.env_id + "' has no weather days");
  GrowthCalendar cal;
  cal.t_base = params.t_base;
  const std::size_t n = env.weather.size();
  cal.gdu.resize(n);
  cal.agdu.resize(n);
  cal.period.resize(n);
  std::vector<double> cumulative(n);
  double running = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const auto& w = env.weather[d];
    cal.gdu[d] = daily_gdu(w.tmax, w.tmin, params.t_base, params.mode, params.clamp);
    running += cal.gdu[d];
    cumulative[d] = running;
  }
  const double total = running;
  if (!(total > 0.0))
    fail(ErrorKind::degenerate, "environment '" + env.env_id +
                                    "': accumulated GDU over the season is zero (try growth.gdu_mode = mean_variant)");
  for (std::size_t d = 0; d < n; ++d) {
    cal.agdu[d] = cumulative[d] / total;
    cal.period[d] = partition.period_of(cal.agdu[d]);
  }
  return cal;
}

inline std::vector<GrowthCalendar> build_calendars(const Dataset& ds, const GrowthParams& params = {},
                                                   const PeriodPartition& partition = {}) {
  std::vector<GrowthCalendar> out;
  out.reserve(ds.num_environments());
  for (const auto& e : ds.environments()) out.push_back(build_calendar(e, params, partition));
  return out;
}

enum class StageKind { W, RD };

struct StageConstants {
  // Crop water factors scaling reference evapotranspiration per period.
  static constexpr std::array<double, kNumPeriods> W{1, 1, 2, 2, 2, 3, 3, 4.6, 5, 6, 6, 7, 8, 8, 9.8, 9, 6, 3.5};
  // Root depth per period.
  static constexpr std::array<double, kNumPeriods> RD{1, 1, 2, 2, 3, 5, 6, 7, 8, 10, 12, 14, 16, 18, 23, 24, 24, 24};
};

inline double stage_constant(StageKind kind, int period) {
  if (period < 0 || period >= kNumPeriods)
    fail(ErrorKind::index, "growth period " + std::to_string(period) + " outside [0, 17]");
  return kind == StageKind::W ? StageConstants::W[period] : StageConstants::RD[period];
}

}  // namespace agrostress
