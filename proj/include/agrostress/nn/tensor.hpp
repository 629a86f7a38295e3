#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/error.hpp"
#include "agrostress/growth.hpp"

namespace agrostress::nn {

enum class StressModule { heat, drought };

inline constexpr int kNumFeatures = 14;

enum class Feature { tmax, tmin, tmean, prec, swe, vp, clay, silt, sand, awc, ph, om, cec, ksat, dayl, srad, gdu };

// Column layouts. Both modules share the static soil/site block, DAYL, SRAD
// and the GDU column; only the first three weather columns differ.
inline const std::array<Feature, kNumFeatures>& feature_layout(StressModule m) {
  static const std::array<Feature, kNumFeatures> heat{Feature::tmax, Feature::tmin, Feature::tmean, Feature::clay,
                                                      Feature::silt, Feature::sand, Feature::awc,   Feature::ph,
                                                      Feature::om,   Feature::cec,  Feature::ksat,  Feature::dayl,
                                                      Feature::srad, Feature::gdu};
  static const std::array<Feature, kNumFeatures> drought{Feature::prec, Feature::swe,  Feature::vp,   Feature::clay,
                                                         Feature::silt, Feature::sand, Feature::awc,  Feature::ph,
                                                         Feature::om,   Feature::cec,  Feature::ksat, Feature::dayl,
                                                         Feature::srad, Feature::gdu};
  return m == StressModule::heat ? heat : drought;
}

inline const char* feature_name(Feature f) {
  switch (f) {
    case Feature::tmax: return "TMAX";
    case Feature::tmin: return "TMIN";
    case Feature::tmean: return "TMEAN";
    case Feature::prec: return "PREC";
    case Feature::swe: return "SWE";
    case Feature::vp: return "VP";
    case Feature::clay: return "CLAY";
    case Feature::silt: return "SILT";
    case Feature::sand: return "SAND";
    case Feature::awc: return "AWC";
    case Feature::ph: return "PH";
    case Feature::om: return "OM";
    case Feature::cec: return "CEC";
    case Feature::ksat: return "KSAT";
    case Feature::dayl: return "DAYL";
    case Feature::srad: return "SRAD";
    case Feature::gdu: return "GDU";
  }
  return "?";
}

inline std::vector<std::string> feature_names(StressModule m) {
  std::vector<std::string> out;
  for (auto f : feature_layout(m)) out.emplace_back(feature_name(f));
  return out;
}

inline double raw_feature(const Environment& env, const GrowthCalendar& cal, std::size_t day, Feature f) {
  const auto& w = env.weather[day];
  switch (f) {
    case Feature::tmax: return w.tmax;
    case Feature::tmin: return w.tmin;
    case Feature::tmean: return w.tmean;
    case Feature::prec: return w.prec;
    case Feature::swe: return w.swe;
    case Feature::vp: return w.vp;
    case Feature::clay: return env.clay;
    case Feature::silt: return env.silt;
    case Feature::sand: return env.sand;
    case Feature::awc: return env.awc;
    case Feature::ph: return env.ph;
    case Feature::om: return env.om;
    case Feature::cec: return env.cec;
    case Feature::ksat: return env.ksat;
    case Feature::dayl: return w.dayl;
    case Feature::srad: return w.srad;
    case Feature::gdu: return cal.gdu[day];
  }
  return 0.0;
}

// Per-column z-score statistics over real (unpadded) days.
struct FeatureStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{};

  static FeatureStats identity() {
    FeatureStats s;
    s.stddev.fill(1.0);
    return s;
  }
};

// Statistics over the given environments, each weighted by how many training
// instances were grown there. Constant columns get a unit scale.
inline FeatureStats compute_feature_stats(const Dataset& ds, const std::vector<GrowthCalendar>& calendars,
                                          const std::vector<std::size_t>& instances, StressModule m) {
  const auto& layout = feature_layout(m);
  std::vector<std::size_t> weight(ds.num_environments(), 0);
  for (auto i : instances) ++weight[ds.env_of(i)];
  std::array<double, kNumFeatures> sum{}, count{};
  for (std::size_t e = 0; e < weight.size(); ++e) {
    if (weight[e] == 0) continue;
    const auto& env = ds.environments()[e];
    for (std::size_t d = 0; d < env.weather.size(); ++d)
      for (int j = 0; j < kNumFeatures; ++j) {
        sum[j] += static_cast<double>(weight[e]) * raw_feature(env, calendars[e], d, layout[j]);
        count[j] += static_cast<double>(weight[e]);
      }
  }
  FeatureStats s;
  if (count[0] == 0.0) fail(ErrorKind::empty_analysis, "no instances to compute feature statistics from");
  for (int j = 0; j < kNumFeatures; ++j) s.mean[j] = sum[j] / count[j];
  std::array<double, kNumFeatures> sq{};
  for (std::size_t e = 0; e < weight.size(); ++e) {
    if (weight[e] == 0) continue;
    const auto& env = ds.environments()[e];
    for (std::size_t d = 0; d < env.weather.size(); ++d)
      for (int j = 0; j < kNumFeatures; ++j) {
        const double dv = raw_feature(env, calendars[e], d, layout[j]) - s.mean[j];
        sq[j] += static_cast<double>(weight[e]) * dv * dv;
      }
  }
  for (int j = 0; j < kNumFeatures; ++j) {
    const double sd = std::sqrt(sq[j] / count[j]);
    s.stddev[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

// Days x features matrix, zero-padded to a fixed number of rows.
struct InstanceTensor {
  StressModule module = StressModule::heat;
  int rows = 0;
  int cols = kNumFeatures;
  std::vector<double> values;  // row-major
  std::vector<unsigned char> mask;

  double at(int d, int j) const { return values[static_cast<std::size_t>(d) * cols + j]; }
};

// Smallest row count >= season that leaves a whole number of stride steps
// after the first window.
inline int padded_days(int longest_season, int filter_height, int stride) {
  if (filter_height <= 0 || stride <= 0) fail(ErrorKind::config, "filter height and stride must be positive");
  if (longest_season < filter_height)
    fail(ErrorKind::config, "season of " + std::to_string(longest_season) + " days is shorter than the filter height " +
                                std::to_string(filter_height));
  const int extra = longest_season - filter_height;
  return filter_height + ((extra + stride - 1) / stride) * stride;
}

inline int conv_windows(int rows, int filter_height, int stride) { return (rows - filter_height) / stride + 1; }

inline InstanceTensor build_instance_tensor(const Environment& env, const GrowthCalendar& cal, StressModule m,
                                            int d_max, const FeatureStats& stats) {
  const int season = static_cast<int>(env.weather.size());
  if (season > d_max)
    fail(ErrorKind::config, "environment '" + env.env_id + "' has a " + std::to_string(season) +
                                "-day season, longer than the padded length " + std::to_string(d_max) +
                                "; increase the padded length");
  if (cal.days() != env.weather.size()) fail(ErrorKind::alignment, "calendar does not match the weather series");
  InstanceTensor t;
  t.module = m;
  t.rows = d_max;
  t.values.assign(static_cast<std::size_t>(d_max) * kNumFeatures, 0.0);
  t.mask.assign(static_cast<std::size_t>(d_max), 0);
  const auto& layout = feature_layout(m);
  for (int d = 0; d < season; ++d) {
    t.mask[static_cast<std::size_t>(d)] = 1;
    for (int j = 0; j < kNumFeatures; ++j)
      t.values[static_cast<std::size_t>(d) * kNumFeatures + j] =
          (raw_feature(env, cal, static_cast<std::size_t>(d), layout[j]) - stats.mean[j]) / stats.stddev[j];
  }
  return t;
}

}  // namespace agrostress::nn
