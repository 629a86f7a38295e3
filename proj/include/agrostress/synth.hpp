#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "agrostress/data.hpp"
#include "agrostress/error.hpp"
#include "agrostress/random.hpp"

namespace agrostress {

enum class LabelLayout {
  blocked,  // susceptible hybrids form contiguous index blocks (breeding families)
  random    // independent uniformly random subsets per stress
};

inline const char* to_string(LabelLayout l) { return l == LabelLayout::blocked ? "blocked" : "random"; }

inline LabelLayout parse_label_layout(const std::string& s) {
  if (s == "blocked") return LabelLayout::blocked;
  if (s == "random") return LabelLayout::random;
  fail(ErrorKind::config, "unknown label layout '" + s + "' (expected blocked or random)");
}

// Generator settings. Yield units are arbitrary (bushel-like scale).
struct SynthConfig {
  int n_hybrids = 200;
  int n_envs = 40;
  int instances_per_hybrid = 8;
  double susceptible_fraction = 0.5;
  LabelLayout label_layout = LabelLayout::blocked;
  int season_length = 120;  // days, planting to harvest inclusive
  int season_jitter = 10;   // extra days added per environment, uniform in [0, jitter]
  int filter_height = 15;   // seasons shorter than this are rejected

  double heat_wave_probability = 0.5;
  double dry_spell_probability = 0.5;
  double heat_wave_amplitude = 12.0;  // degC added to daily temperatures at full intensity
  // Episode windows as fractions of the season. Both lie late in the season.
  double heat_wave_start = 0.62;
  double heat_wave_length = 0.14;
  double dry_spell_start = 0.50;
  double dry_spell_length = 0.35;
  double dry_spell_humidity_drop = 0.3;  // relative vapour pressure loss at full dry-spell intensity

  std::array<double, 4> irrigation_weights{0.55, 0.15, 0.15, 0.15};  // relative frequency of irr = 0..3

  double rain_probability = 0.3;
  double rain_mean = 18.0;  // mm per rain day

  double max_yield_lo = 180.0;
  double max_yield_hi = 240.0;
  double heat_penalty_lo = 30.0;  // yield loss at full heat-wave intensity
  double heat_penalty_hi = 50.0;
  double drought_penalty_lo = 30.0;
  double drought_penalty_hi = 50.0;
  double yield_noise = 4.0;

  void validate() const {
    if (n_hybrids < 2) fail(ErrorKind::config, "synth.n_hybrids must be >= 2");
    if (n_envs < 2) fail(ErrorKind::config, "synth.n_envs must be >= 2");
    if (instances_per_hybrid < 2) fail(ErrorKind::config, "synth.instances_per_hybrid must be >= 2");
    if (instances_per_hybrid > n_envs) fail(ErrorKind::config, "synth.instances_per_hybrid must be <= n_envs");
    if (!(susceptible_fraction >= 0.0 && susceptible_fraction <= 1.0))
      fail(ErrorKind::config, "synth.susceptible_fraction must lie in [0, 1]");
    if (season_length < filter_height || season_length < 2)
      fail(ErrorKind::config, "synth.season_length must be >= the filter height (" + std::to_string(filter_height) + ")");
    if (season_jitter < 0) fail(ErrorKind::config, "synth.season_jitter must be >= 0");
    for (double f : {heat_wave_probability, dry_spell_probability, rain_probability})
      if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::config, "synth probabilities must lie in [0, 1]");
    for (double f : {heat_wave_start, heat_wave_length, dry_spell_start, dry_spell_length, dry_spell_humidity_drop})
      if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::config, "synth episode windows must lie in [0, 1]");
    if (!(max_yield_lo <= max_yield_hi) || max_yield_lo < 0.0) fail(ErrorKind::config, "synth max yield range invalid");
    double w_total = 0.0;
    for (double w : irrigation_weights) {
      if (!(w >= 0.0)) fail(ErrorKind::config, "synth.irrigation_weights must be non-negative");
      w_total += w;
    }
    if (!(w_total > 0.0)) fail(ErrorKind::config, "synth.irrigation_weights must not all be zero");
    if (!(yield_noise >= 0.0)) fail(ErrorKind::config, "synth.yield_noise must be >= 0");
  }
};

struct HybridTruth {
  bool heat_susceptible = false;
  bool drought_susceptible = false;
  double max_yield = 0.0;
  double heat_coefficient = 0.0;     // yield loss per unit heat-wave intensity
  double drought_coefficient = 0.0;  // yield loss per unit dry-spell intensity without irrigation
};

struct EnvironmentTruth {
  double heat_intensity = 0.0;  // [0, 1]
  double dry_intensity = 0.0;   // [0, 1]
};

struct SynthGroundTruth {
  std::vector<std::string> hybrid_ids;
  std::vector<HybridTruth> hybrids;
  std::vector<EnvironmentTruth> environments;
  // Penalty terms applied to each instance, in instance order.
  std::vector<double> heat_penalty;
  std::vector<double> drought_penalty;

  double dual_resistant_fraction() const {
    if (hybrids.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& h : hybrids) n += (!h.heat_susceptible && !h.drought_susceptible) ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(hybrids.size());
  }
};

struct SynthResult {
  Dataset dataset;
  SynthGroundTruth truth;
};

namespace detail {

inline std::string padded_id(const char* prefix, int i, int width) {
  std::string n = std::to_string(i);
  if (static_cast<int>(n.size()) < width) n.insert(0, static_cast<std::size_t>(width) - n.size(), '0');
  return prefix + n;
}

// Rounds to a number of decimals so values print back exactly.
inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

inline int draw_irrigation(const std::array<double, 4>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (int k = 0; k < 3; ++k) {
    if (u < weights[static_cast<std::size_t>(k)]) return k;
    u -= weights[static_cast<std::size_t>(k)];
  }
  return 3;
}

inline bool in_window(int day, int length, double start, double span) {
  const double f = static_cast<double>(day) / static_cast<double>(length);
  return f >= start && f < start + span;
}

}  // namespace detail

// Builds a dataset with planted susceptibility. Weather values are rounded to
// 0.01 so that CSV round-trips are exact and human readable.
inline SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto r2 = [](double v) { return detail::round_to(v, 2); };

  SynthGroundTruth truth;
  std::vector<Environment> envs;
  envs.reserve(static_cast<std::size_t>(cfg.n_envs));
  const int env_width = static_cast<int>(std::to_string(cfg.n_envs - 1).size());
  for (int e = 0; e < cfg.n_envs; ++e) {
    Environment env;
    env.env_id = detail::padded_id("E", e, env_width);
    env.planting_day = 100 + static_cast<int>(uniform_index(rng, 31));
    const int length = cfg.season_length + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.season_jitter) + 1));
    env.harvest_day = env.planting_day + length - 1;
    env.elev = r2(uniform(rng, 100.0, 600.0));
    env.clay = r2(uniform(rng, 10.0, 40.0));
    env.silt = r2(uniform(rng, 20.0, 50.0));
    env.sand = r2(100.0 - env.clay - env.silt);
    env.awc = r2(uniform(rng, 0.10, 0.25));
    env.ph = r2(uniform(rng, 5.5, 7.5));
    env.om = r2(uniform(rng, 1.0, 4.0));
    env.cec = r2(uniform(rng, 5.0, 30.0));
    env.ksat = r2(uniform(rng, 2.0, 80.0));

    EnvironmentTruth et;
    if (uniform01(rng) < cfg.heat_wave_probability) et.heat_intensity = uniform(rng, 0.3, 1.0);
    if (uniform01(rng) < cfg.dry_spell_probability) et.dry_intensity = uniform(rng, 0.3, 1.0);
    truth.environments.push_back(et);

    const double base = uniform(rng, 12.0, 16.0);
    const double amplitude = uniform(rng, 6.0, 9.0);
    double anomaly = 0.0;
    env.weather.resize(static_cast<std::size_t>(length));
    for (int d = 0; d < length; ++d) {
      const double phase = std::sin(std::numbers::pi * static_cast<double>(d) / static_cast<double>(length - 1));
      anomaly = 0.7 * anomaly + normal(rng, 0.0, 1.2);
      double tmean = base + amplitude * phase + anomaly;
      const double baseline_tmean = tmean;
      if (detail::in_window(d, length, cfg.heat_wave_start, cfg.heat_wave_length))
        tmean += cfg.heat_wave_amplitude * et.heat_intensity;
      const double upper = uniform(rng, 4.0, 7.5);
      const double lower = uniform(rng, 4.0, 7.5);
      const bool dry = detail::in_window(d, length, cfg.dry_spell_start, cfg.dry_spell_length);
      const double rain_p = cfg.rain_probability * (dry ? 1.0 - et.dry_intensity : 1.0);
      const double rain = uniform01(rng) < rain_p ? exponential(rng, cfg.rain_mean) : 0.0;
      const double baseline_tmin = baseline_tmean - lower;
      const double saturation = 0.61 * std::exp(17.27 * baseline_tmin / (baseline_tmin + 237.3));
      const double humidity = uniform(rng, 0.85, 1.0) * (dry ? 1.0 - cfg.dry_spell_humidity_drop * et.dry_intensity : 1.0);

      auto& w = env.weather[static_cast<std::size_t>(d)];
      w.day_index = d;
      w.tmean = r2(tmean);
      w.tmax = r2(w.tmean + upper);
      w.tmin = r2(w.tmean - lower);
      w.prec = r2(rain);
      w.srad = r2(std::max(1.0, 14.0 + 8.0 * phase + normal(rng, 0.0, 2.5)));
      w.swe = 0.0;
      w.vp = r2(std::max(0.0, saturation * humidity));
      w.dayl = std::round(43200.0 + 9000.0 * phase);
    }
    envs.push_back(std::move(env));
  }

  const int n = cfg.n_hybrids;
  const int n_sus = static_cast<int>(std::lround(cfg.susceptible_fraction * n));
  std::vector<bool> heat_label(static_cast<std::size_t>(n), false), drought_label(static_cast<std::size_t>(n), false);
  if (cfg.label_layout == LabelLayout::blocked) {
    // Heat block starts at 0; the drought block is shifted by half its size so
    // all four label combinations occur.
    const int offset = static_cast<int>(std::lround(cfg.susceptible_fraction * n / 2.0));
    for (int i = 0; i < n_sus; ++i) {
      heat_label[static_cast<std::size_t>(i)] = true;
      drought_label[static_cast<std::size_t>((i + offset) % n)] = true;
    }
  } else {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    shuffle(order, rng);
    for (int i = 0; i < n_sus; ++i) heat_label[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    shuffle(order, rng);
    for (int i = 0; i < n_sus; ++i) drought_label[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  }

  std::vector<PlantingInstance> instances;
  const int hybrid_width = static_cast<int>(std::to_string(n - 1).size());
  std::vector<int> env_order(static_cast<std::size_t>(cfg.n_envs));
  for (int h = 0; h < n; ++h) {
    HybridTruth ht;
    ht.heat_susceptible = heat_label[static_cast<std::size_t>(h)];
    ht.drought_susceptible = drought_label[static_cast<std::size_t>(h)];
    ht.max_yield = uniform(rng, cfg.max_yield_lo, cfg.max_yield_hi);
    ht.heat_coefficient = uniform(rng, cfg.heat_penalty_lo, cfg.heat_penalty_hi);
    ht.drought_coefficient = uniform(rng, cfg.drought_penalty_lo, cfg.drought_penalty_hi);
    const std::string id = detail::padded_id("H", h, hybrid_width);
    truth.hybrid_ids.push_back(id);
    truth.hybrids.push_back(ht);

    for (int e = 0; e < cfg.n_envs; ++e) env_order[static_cast<std::size_t>(e)] = e;
    shuffle(env_order, rng);
    for (int k = 0; k < cfg.instances_per_hybrid; ++k) {
      const int e = env_order[static_cast<std::size_t>(k)];
      const auto& et = truth.environments[static_cast<std::size_t>(e)];
      PlantingInstance p;
      p.hybrid_id = id;
      p.env_id = envs[static_cast<std::size_t>(e)].env_id;
      p.irr = detail::draw_irrigation(cfg.irrigation_weights, rng);
      const double heat_pen = ht.heat_susceptible ? ht.heat_coefficient * et.heat_intensity : 0.0;
      const double drought_pen =
          ht.drought_susceptible ? ht.drought_coefficient * et.dry_intensity * (1.0 - p.irr / 3.0) : 0.0;
      const double noise = normal(rng, 0.0, cfg.yield_noise);
      p.yield_obs = r2(std::max(0.0, ht.max_yield - heat_pen - drought_pen + noise));
      truth.heat_penalty.push_back(heat_pen);
      truth.drought_penalty.push_back(drought_pen);
      instances.push_back(std::move(p));
    }
  }

  return {Dataset(std::move(envs), std::move(instances)), std::move(truth)};
}

inline void write_ground_truth_csv(const SynthGroundTruth& t, std::ostream& out) {
  csv::Writer w(out);
  w.field("hybrid_id").field("heat_susceptible").field("drought_susceptible").field("max_yield");
  w.field("heat_coefficient").field("drought_coefficient");
  w.end_row();
  for (std::size_t i = 0; i < t.hybrids.size(); ++i) {
    const auto& h = t.hybrids[i];
    w.field(t.hybrid_ids[i]).field(h.heat_susceptible ? 1 : 0).field(h.drought_susceptible ? 1 : 0);
    w.field(h.max_yield).field(h.heat_coefficient).field(h.drought_coefficient);
    w.end_row();
  }
}

inline SynthGroundTruth read_ground_truth_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  t.require({"hybrid_id", "heat_susceptible", "drought_susceptible", "max_yield", "heat_coefficient",
             "drought_coefficient"});
  SynthGroundTruth g;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    g.hybrid_ids.push_back(t.cell(r, t.column("hybrid_id")));
    HybridTruth h;
    h.heat_susceptible = t.integer(r, t.column("heat_susceptible")) != 0;
    h.drought_susceptible = t.integer(r, t.column("drought_susceptible")) != 0;
    h.max_yield = t.number(r, t.column("max_yield"));
    h.heat_coefficient = t.number(r, t.column("heat_coefficient"));
    h.drought_coefficient = t.number(r, t.column("drought_coefficient"));
    g.hybrids.push_back(h);
  }
  return g;
}

}  // namespace agrostress
