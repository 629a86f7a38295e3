#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrostress/csv.hpp"
#include "agrostress/data.hpp"
#include "agrostress/dem_stress.hpp"
#include "agrostress/error.hpp"
#include "agrostress/nn/model.hpp"
#include "agrostress/parallel.hpp"

namespace agrostress::sensitivity {

// Per instance: the hybrid's best observed yield minus this yield.
inline std::vector<double> compute_delta_yield(const Dataset& ds) {
  std::vector<double> out(ds.num_instances(), 0.0);
  for (const auto& members : ds.instances_by_hybrid()) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : members) best = std::max(best, ds.instances()[i].yield_obs);
    for (auto i : members) out[i] = best - ds.instances()[i].yield_obs;
  }
  return out;
}

enum class FilterKind { all, warm, cold };

inline const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::all: return "all";
    case FilterKind::warm: return "warm";
    case FilterKind::cold: return "cold";
  }
  return "all";
}

inline FilterKind parse_filter_kind(const std::string& s) {
  if (s == "all") return FilterKind::all;
  if (s == "warm") return FilterKind::warm;
  if (s == "cold") return FilterKind::cold;
  fail(ErrorKind::config, "unknown environment filter '" + s + "' (expected all, warm or cold)");
}

// An environment is warm when any day's mean temperature exceeds the
// threshold; cold is the complement.
struct EnvFilter {
  FilterKind kind = FilterKind::all;
  double warm_threshold = 35.0;

  bool is_warm(const Environment& e) const {
    return std::any_of(e.weather.begin(), e.weather.end(), [&](const DailyWeather& w) { return w.tmean > warm_threshold; });
  }
  bool keeps(const Environment& e) const {
    switch (kind) {
      case FilterKind::all: return true;
      case FilterKind::warm: return is_warm(e);
      case FilterKind::cold: return !is_warm(e);
    }
    return true;
  }
  std::vector<bool> retained(const Dataset& ds) const {
    std::vector<bool> env_ok(ds.num_environments());
    for (std::size_t e = 0; e < env_ok.size(); ++e) env_ok[e] = keeps(ds.environments()[e]);
    std::vector<bool> out(ds.num_instances());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = env_ok[ds.env_of(i)];
    return out;
  }
};

struct SensitivityMatrix {
  std::string kind;  // C_heat, C_drought, C_combined, R_heat, R_drought, R_combined
  std::vector<std::string> hybrid_ids;
  std::vector<std::vector<double>> rows;
  EnvFilter filter;
  std::string columns;  // "growth_period" or "conv_window"

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_cols() const { return rows.empty() ? 0 : rows.front().size(); }
};

inline const char* stress_suffix(dem::StressKind k) {
  switch (k) {
    case dem::StressKind::heat: return "heat";
    case dem::StressKind::drought: return "drought";
    case dem::StressKind::combined: return "combined";
    default: fail(ErrorKind::parameter, "sensitivity matrices use the heat, drought or combined stress");
  }
}

inline dem::StressKind parse_sensitivity_stress(const std::string& s) {
  if (s == "heat") return dem::StressKind::heat;
  if (s == "drought") return dem::StressKind::drought;
  if (s == "combined") return dem::StressKind::combined;
  fail(ErrorKind::config, "unknown stress '" + s + "' (expected heat, drought or combined)");
}

// C[i][t] = population covariance, over hybrid i's retained instances, of
// delta yield and the period-t stress. Hybrids with fewer than two retained
// instances get a zero row. Uses single-pass co-moment updates.
inline SensitivityMatrix covariance_matrix(const Dataset& ds, std::span<const dem::StressVector18> stress,
                                           std::span<const double> delta_yield, const EnvFilter& filter = {},
                                           const std::string& kind = "C") {
  if (stress.size() != ds.num_instances() || delta_yield.size() != ds.num_instances())
    fail(ErrorKind::alignment, "covariance_matrix: one stress vector and one delta yield per instance required");
  const auto keep = filter.retained(ds);
  if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; }))
    fail(ErrorKind::empty_analysis, std::string("environment filter '") + to_string(filter.kind) +
                                        "' retains no planting instances");
  SensitivityMatrix m;
  m.kind = kind;
  m.hybrid_ids = ds.hybrid_ids();
  m.filter = filter;
  m.columns = "growth_period";
  m.rows.assign(ds.num_hybrids(), std::vector<double>(kNumPeriods, 0.0));
  for (std::size_t h = 0; h < ds.num_hybrids(); ++h) {
    double n = 0.0, mean_y = 0.0;
    std::array<double, kNumPeriods> mean_s{}, co{};
    for (auto i : ds.instances_by_hybrid()[h]) {
      if (!keep[i]) continue;
      n += 1.0;
      const double dy = delta_yield[i] - mean_y;
      mean_y += dy / n;
      for (int t = 0; t < kNumPeriods; ++t) {
        mean_s[t] += (stress[i][t] - mean_s[t]) / n;
        co[t] += dy * (stress[i][t] - mean_s[t]);
      }
    }
    if (n < 2.0) continue;
    for (int t = 0; t < kNumPeriods; ++t) m.rows[h][t] = co[t] / n;
  }
  return m;
}

// R[i][t] = sum over the given instances of hybrid i of d(prediction)/d(S_t).
// `instances` is a multiset: repeated indices contribute repeatedly.
inline SensitivityMatrix susceptibility_matrix(const nn::ModelBundle& b, const nn::PreparedData& pd,
                                               const Dataset& ds, dem::StressKind stress,
                                               const std::vector<std::size_t>& instances, const EnvFilter& filter = {},
                                               int threads = 1) {
  if (!b.trained) fail(ErrorKind::state, "susceptibility matrix needs a trained model");
  const std::string suffix = stress_suffix(stress);
  const auto keep = filter.retained(ds);
  std::vector<std::vector<std::size_t>> by_hybrid(b.hybrid_ids.size());
  for (auto i : instances) {
    if (i >= pd.size()) fail(ErrorKind::index, "instance index " + std::to_string(i) + " out of range");
    if (keep[i]) by_hybrid[pd.hybrid[i]].push_back(i);
  }
  const std::size_t len = static_cast<std::size_t>(b.spec.stress_length());
  SensitivityMatrix m;
  m.kind = "R_" + suffix;
  m.hybrid_ids = b.hybrid_ids;
  m.filter = filter;
  m.columns = b.spec.kind == nn::ModelKind::cnn_mlp ? "conv_window" : "growth_period";
  m.rows.assign(b.hybrid_ids.size(), std::vector<double>(len, 0.0));
  parallel_for(by_hybrid.size(), threads, [&](std::size_t h) {
    for (auto i : by_hybrid[h]) {
      const auto g = nn::stress_gradient(b, pd, i);
      const auto& v = stress == dem::StressKind::heat ? g.heat : stress == dem::StressKind::drought ? g.drought : g.combined;
      for (std::size_t t = 0; t < len; ++t) m.rows[h][t] += v[t];
    }
  });
  return m;
}

inline SensitivityMatrix susceptibility_matrix(const nn::ModelBundle& b, const nn::PreparedData& pd,
                                               const Dataset& ds, dem::StressKind stress, const EnvFilter& filter = {},
                                               int threads = 1) {
  std::vector<std::size_t> all(pd.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return susceptibility_matrix(b, pd, ds, stress, all, filter, threads);
}

inline void write_matrix_csv(const SensitivityMatrix& m, std::ostream& out) {
  csv::Writer w(out);
  w.field("hybrid_id");
  for (std::size_t t = 0; t < m.num_cols(); ++t) w.field("c" + std::to_string(t));
  w.end_row();
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    w.field(m.hybrid_ids[i]);
    for (double v : m.rows[i]) w.field(v);
    w.end_row();
  }
}

inline nlohmann::json matrix_descriptor(const SensitivityMatrix& m) {
  return {{"kind", m.kind},
          {"rows", m.num_rows()},
          {"columns", m.num_cols()},
          {"column_semantics", m.columns},
          {"filter", {{"kind", to_string(m.filter.kind)}, {"warm_threshold", m.filter.warm_threshold}}}};
}

inline SensitivityMatrix read_matrix_csv(const std::filesystem::path& path, const std::string& kind = "") {
  const auto table = csv::read_file(path.string());
  const std::size_t id_col = table.column("hybrid_id");
  SensitivityMatrix m;
  m.kind = kind;
  std::vector<std::size_t> cols;
  for (std::size_t t = 0; table.has_column("c" + std::to_string(t)); ++t) cols.push_back(table.column("c" + std::to_string(t)));
  if (cols.empty()) fail(ErrorKind::schema, path.string() + ": no c0.. columns");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    m.hybrid_ids.push_back(table.rows[r][id_col]);
    std::vector<double> row;
    for (auto c : cols) row.push_back(table.number(r, c));
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace agrostress::sensitivity
