#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/error.hpp"
#include "agrostress/growth.hpp"

namespace agrostress::dem {

using StressVector18 = std::array<double, kNumPeriods>;

struct HeatParams {
  std::array<double, 4> temp{10.0, 20.0, 25.0, 35.0};  // S_temp thresholds T0..T3
  std::array<double, 2> heat{25.0, 30.0};              // S_H cut-off T2, T3
  std::array<double, 2> cold{10.0, 15.0};              // S_cold ramp T0, T1
  double a0 = 0.9;                                     // accumulation factor A = a0 + a1 * run length
  double a1 = 0.1;

  void validate() const {
    for (int i = 0; i < 3; ++i)
      if (!(temp[i] < temp[i + 1])) fail(ErrorKind::parameter, "heat.temp thresholds must be strictly increasing");
    if (!(heat[0] < heat[1])) fail(ErrorKind::parameter, "heat.heat thresholds must be strictly increasing");
    if (!(cold[0] < cold[1])) fail(ErrorKind::parameter, "heat.cold thresholds must be strictly increasing");
    if (!(a0 > 0.0) || !(a1 >= 0.0)) fail(ErrorKind::parameter, "accumulation constants need a0 > 0, a1 >= 0");
  }
};

struct DroughtParams {
  double p = 0.5;                    // depletion fraction in MAD
  double q = 1.0 / 3.0;              // irrigation coefficient
  double ksat_min = 0.0;             // runoff normalisation bounds, frozen from the dataset
  double ksat_max = 1.0;
  double initial_aw_fraction = 1.0;  // AW on planting day as a fraction of MAD(period 0)

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::parameter, "drought.p must lie in (0, 1)");
    if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::parameter, "drought.q must lie in (0, 1)");
    if (!(ksat_min < ksat_max)) fail(ErrorKind::parameter, "drought ksat bounds need ksat_min < ksat_max");
    if (!(initial_aw_fraction >= 0.0)) fail(ErrorKind::parameter, "drought.initial_aw_fraction must be >= 0");
  }

  // Takes the runoff normalisation bounds from the dataset's extremal KSAT.
  void freeze_ksat_bounds(const Dataset& ds) {
    if (ds.environments().empty()) fail(ErrorKind::empty_analysis, "no environments to derive KSAT bounds from");
    ksat_min = ksat_max = ds.environments().front().ksat;
    for (const auto& e : ds.environments()) {
      ksat_min = std::min(ksat_min, e.ksat);
      ksat_max = std::max(ksat_max, e.ksat);
    }
    if (!(ksat_min < ksat_max)) ksat_max = ksat_min + 1.0;
  }
};

enum class CombineKind { product, sum, exp_product, exp_sum };

inline const char* to_string(CombineKind k) {
  switch (k) {
    case CombineKind::product: return "product";
    case CombineKind::sum: return "sum";
    case CombineKind::exp_product: return "exp_product";
    case CombineKind::exp_sum: return "exp_sum";
  }
  return "product";
}

inline CombineKind parse_combine_kind(const std::string& s) {
  if (s == "product") return CombineKind::product;
  if (s == "sum") return CombineKind::sum;
  if (s == "exp_product") return CombineKind::exp_product;
  if (s == "exp_sum") return CombineKind::exp_sum;
  fail(ErrorKind::config, "unknown combination '" + s + "' (expected product, sum, exp_product or exp_sum)");
}

// Stress is 1 outside [T0, T3], 0 on the plateau [T1, T2], linear in between.
inline double s_temp(double tmean, const std::array<double, 4>& t) {
  if (tmean <= t[0] || tmean >= t[3]) return 1.0;
  if (tmean < t[1]) return 1.0 - (tmean - t[0]) / (t[1] - t[0]);
  if (tmean <= t[2]) return 0.0;
  return 1.0 - (t[3] - tmean) / (t[3] - t[2]);
}

inline double s_heat(double tmean, double t2, double t3) {
  if (!(t2 < t3)) fail(ErrorKind::parameter, "s_heat needs t2 < t3");
  if (tmean <= t2) return 0.0;
  if (tmean >= t3) return 1.0;
  return (tmean - t2) / (t3 - t2);
}

inline double s_cold(double tmean, double t0, double t1) {
  if (!(t0 < t1)) fail(ErrorKind::parameter, "s_cold needs t0 < t1");
  if (tmean <= t0) return 1.0;
  if (tmean >= t1) return 0.0;
  return 1.0 - (tmean - t0) / (t1 - t0);
}

// Every maximal run of l consecutive positive days is scaled by a0 + a1 * l.
inline std::vector<double> s_heat_accumulated(std::span<const double> daily_s_h, double a0 = 0.9, double a1 = 0.1) {
  std::vector<double> out(daily_s_h.begin(), daily_s_h.end());
  std::size_t d = 0;
  while (d < out.size()) {
    if (!(out[d] > 0.0)) {
      ++d;
      continue;
    }
    std::size_t end = d;
    while (end < out.size() && out[end] > 0.0) ++end;
    const double factor = a0 + a1 * static_cast<double>(end - d);
    for (std::size_t i = d; i < end; ++i) out[i] *= factor;
    d = end;
  }
  return out;
}

inline double atmospheric_pressure(double elev) { return 101.3 * std::pow(1.0 - 0.0065 * elev / 293.0, 5.26); }

inline double psychrometric_constant(double elev) { return 0.000665 * atmospheric_pressure(elev); }

// Vapour pressure deficit, Tetens form.
inline double vapour_pressure_deficit(double tmean, double vp) {
  return 0.61 * std::exp(17.27 * tmean / (tmean + 237.3)) - vp;
}

// Slope of the saturation vapour pressure curve. The denominator uses
// (T + 273.3)^2 exactly as in the reference formulation.
inline double saturation_slope(double tmean) {
  return 2499.78 * std::exp(17.27 * tmean / (tmean + 237.3)) / ((tmean + 273.3) * (tmean + 273.3));
}

// Reference evapotranspiration (mm/day), clamped at 0 when super-saturated
// air would make it negative.
inline double et0_daily(double tmean, double elev, double vp, double srad) {
  if (!(tmean > -273.0)) fail(ErrorKind::domain, "et0_daily: tmean must exceed -273");
  const double gamma = psychrometric_constant(elev);
  const double v = vapour_pressure_deficit(tmean, vp);
  const double delta = saturation_slope(tmean);
  const double et0 = (0.408 * delta * srad + gamma * v * 900.0 / (273.0 + tmean)) / (delta + gamma);
  return et0 > 0.0 ? et0 : 0.0;
}

inline double et_daily(double et0, int period) { return stage_constant(StageKind::W, period) * et0; }

inline double mad(double p, int period, double awc) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::parameter, "mad: p must lie in (0, 1)");
  if (!(awc > 0.0)) fail(ErrorKind::parameter, "mad: awc must be positive");
  return p * stage_constant(StageKind::RD, period) * awc;
}

inline double runoff_fraction(double ksat, double ksat_min, double ksat_max) {
  if (!(ksat_min < ksat_max)) fail(ErrorKind::parameter, "runoff_fraction: ksat_min must be < ksat_max");
  const double k = std::clamp(ksat, ksat_min, ksat_max);
  return (k - ksat_min) / (ksat_max - ksat_min);
}

inline double s_drought(double mad_value, double aw, int irr, double q) {
  if (irr < 0 || irr > 3) fail(ErrorKind::parameter, "s_drought: irr must be in {0, 1, 2, 3}");
  if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::parameter, "s_drought: q must lie in (0, 1)");
  const double v = (mad_value - aw) * (1.0 - q * irr);
  return v > 0.0 ? v : 0.0;
}

inline double s_combined(double s_h, double s_d, CombineKind kind) {
  switch (kind) {
    case CombineKind::product: return s_h * s_d;
    case CombineKind::sum: return s_h + s_d;
    case CombineKind::exp_product: return std::expm1(s_h * s_d);
    case CombineKind::exp_sum: return std::expm1(s_h + s_d);
  }
  return 0.0;
}

// Partial derivatives of s_combined with respect to (s_h, s_d).
inline std::array<double, 2> s_combined_grad(double s_h, double s_d, CombineKind kind) {
  switch (kind) {
    case CombineKind::product: return {s_d, s_h};
    case CombineKind::sum: return {1.0, 1.0};
    case CombineKind::exp_product: {
      const double e = std::exp(s_h * s_d);
      return {s_d * e, s_h * e};
    }
    case CombineKind::exp_sum: {
      const double e = std::exp(s_h + s_d);
      return {e, e};
    }
  }
  return {0.0, 0.0};
}

// One day of the soil water recursion, floored at zero.
inline double aw_step(double aw_prev, double ro, double prec_prev, double et) {
  const double v = (1.0 - ro) * aw_prev + prec_prev - et;
  return v > 0.0 ? v : 0.0;
}

struct WaterState {
  std::vector<double> et0, et, mad, aw;
  double ro = 0.0;
};

// Soil water recursion AW_d = [(1 - RO) AW_{d-1} + PREC_{d-1} - ET_d]_+,
// seeded on the planting day with AW_0 = initial_aw_fraction * MAD_0.
inline WaterState water_balance(const Environment& env, const GrowthCalendar& cal, const DroughtParams& params) {
  params.validate();
  const std::size_t n = env.weather.size();
  if (cal.days() != n) fail(ErrorKind::alignment, "water_balance: calendar and weather lengths differ");
  WaterState ws;
  ws.ro = runoff_fraction(env.ksat, params.ksat_min, params.ksat_max);
  ws.et0.resize(n);
  ws.et.resize(n);
  ws.mad.resize(n);
  ws.aw.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    const auto& w = env.weather[d];
    ws.et0[d] = et0_daily(w.tmean, env.elev, w.vp, w.srad);
    ws.et[d] = et_daily(ws.et0[d], cal.period[d]);
    ws.mad[d] = mad(params.p, cal.period[d], env.awc);
    if (d == 0) {
      ws.aw[d] = params.initial_aw_fraction * ws.mad[0];
    } else {
      ws.aw[d] = aw_step(ws.aw[d - 1], ws.ro, env.weather[d - 1].prec, ws.et[d]);
    }
  }
  return ws;
}

inline StressVector18 aggregate_periods(std::span<const double> daily, const GrowthCalendar& cal) {
  if (daily.size() != cal.days())
    fail(ErrorKind::alignment, "aggregate_periods: series has " + std::to_string(daily.size()) +
                                   " days, calendar has " + std::to_string(cal.days()));
  StressVector18 out{};
  for (std::size_t d = 0; d < daily.size(); ++d) out[static_cast<std::size_t>(cal.period[d])] += daily[d];
  return out;
}

enum class StressKind { temp, heat, cold, heat_accumulated, drought, combined };

inline constexpr std::array<StressKind, 6> kAllStressKinds{StressKind::temp,    StressKind::heat,
                                                          StressKind::cold,    StressKind::heat_accumulated,
                                                          StressKind::drought, StressKind::combined};

inline const char* to_string(StressKind k) {
  switch (k) {
    case StressKind::temp: return "temp";
    case StressKind::heat: return "heat";
    case StressKind::cold: return "cold";
    case StressKind::heat_accumulated: return "heat_accumulated";
    case StressKind::drought: return "drought";
    case StressKind::combined: return "combined";
  }
  return "?";
}

struct StressSeries {
  std::vector<double> temp, heat, cold, heat_accumulated, drought, combined;

  const std::vector<double>& of(StressKind k) const {
    switch (k) {
      case StressKind::temp: return temp;
      case StressKind::heat: return heat;
      case StressKind::cold: return cold;
      case StressKind::heat_accumulated: return heat_accumulated;
      case StressKind::drought: return drought;
      case StressKind::combined: return combined;
    }
    return temp;
  }
};

struct DemParams {
  HeatParams heat;
  DroughtParams drought;
  CombineKind combine = CombineKind::product;

  void validate() const {
    heat.validate();
    drought.validate();
  }
};

// Heat-side daily stresses depend only on the environment.
inline StressSeries heat_series(const Environment& env, const HeatParams& hp) {
  StressSeries s;
  const std::size_t n = env.weather.size();
  s.temp.resize(n);
  s.heat.resize(n);
  s.cold.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    const double t = env.weather[d].tmean;
    s.temp[d] = s_temp(t, hp.temp);
    s.heat[d] = s_heat(t, hp.heat[0], hp.heat[1]);
    s.cold[d] = s_cold(t, hp.cold[0], hp.cold[1]);
  }
  s.heat_accumulated = s_heat_accumulated(s.heat, hp.a0, hp.a1);
  return s;
}

inline StressSeries daily_stresses(const Environment& env, int irr, const DemParams& p, const WaterState& ws) {
  StressSeries s = heat_series(env, p.heat);
  const std::size_t n = env.weather.size();
  s.drought.resize(n);
  s.combined.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    s.drought[d] = s_drought(ws.mad[d], ws.aw[d], irr, p.drought.q);
    s.combined[d] = s_combined(s.heat[d], s.drought[d], p.combine);
  }
  return s;
}

inline StressSeries daily_stresses(const Environment& env, int irr, const GrowthCalendar& cal, const DemParams& p) {
  return daily_stresses(env, irr, p, water_balance(env, cal, p.drought));
}

struct InstanceStress {
  StressVector18 temp{}, heat{}, cold{}, heat_accumulated{}, drought{}, combined{};

  const StressVector18& of(StressKind k) const {
    switch (k) {
      case StressKind::temp: return temp;
      case StressKind::heat: return heat;
      case StressKind::cold: return cold;
      case StressKind::heat_accumulated: return heat_accumulated;
      case StressKind::drought: return drought;
      case StressKind::combined: return combined;
    }
    return temp;
  }
};

inline InstanceStress aggregate(const StressSeries& s, const GrowthCalendar& cal) {
  InstanceStress v;
  v.temp = aggregate_periods(s.temp, cal);
  v.heat = aggregate_periods(s.heat, cal);
  v.cold = aggregate_periods(s.cold, cal);
  v.heat_accumulated = aggregate_periods(s.heat_accumulated, cal);
  v.drought = aggregate_periods(s.drought, cal);
  v.combined = aggregate_periods(s.combined, cal);
  return v;
}

// Period vectors of every stress kind for every instance of a dataset.
// Calendars and water balances are computed once per environment.
inline std::vector<InstanceStress> instance_stresses(const Dataset& ds, const std::vector<GrowthCalendar>& calendars,
                                                     const DemParams& p) {
  p.validate();
  std::vector<WaterState> water;
  water.reserve(ds.num_environments());
  for (std::size_t e = 0; e < ds.num_environments(); ++e)
    water.push_back(water_balance(ds.environments()[e], calendars[e], p.drought));
  std::vector<InstanceStress> out;
  out.reserve(ds.num_instances());
  for (std::size_t i = 0; i < ds.num_instances(); ++i) {
    const std::size_t e = ds.env_of(i);
    const auto series = daily_stresses(ds.environments()[e], ds.instances()[i].irr, p, water[e]);
    out.push_back(aggregate(series, calendars[e]));
  }
  return out;
}

}  // namespace agrostress::dem
