#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "agrostress/csv.hpp"
#include "agrostress/error.hpp"

namespace agrostress {

// One day of weather. Units: degC, mm/day, MJ m^-2 day^-1, mm, kPa, seconds.
struct DailyWeather {
  int day_index = 0;  // 0 = planting day
  double tmax = 0.0;
  double tmin = 0.0;
  double tmean = 0.0;
  double prec = 0.0;
  double srad = 0.0;
  double swe = 0.0;
  double vp = 0.0;
  double dayl = 0.0;
};

struct Environment {
  std::string env_id;
  int planting_day = 0;
  int harvest_day = 0;
  double elev = 0.0;
  double clay = 0.0;
  double silt = 0.0;
  double sand = 0.0;
  double awc = 0.0;
  double ph = 0.0;
  double om = 0.0;
  double cec = 0.0;
  double ksat = 0.0;
  std::vector<DailyWeather> weather;  // planting .. harvest inclusive

  int season_length() const { return harvest_day - planting_day + 1; }
};

struct PlantingInstance {
  std::string hybrid_id;
  std::string env_id;
  int irr = 0;
  double yield_obs = 0.0;
};

inline const std::vector<std::string>& weather_columns() {
  static const std::vector<std::string> cols{"env_id", "day", "tmax", "tmin", "tmean",
                                             "prec",   "srad", "swe", "vp",   "dayl"};
  return cols;
}

inline const std::vector<std::string>& environment_columns() {
  static const std::vector<std::string> cols{"env_id", "planting_day", "harvest_day", "elev", "clay", "silt",
                                             "sand",   "awc",          "ph",          "om",   "cec",  "ksat"};
  return cols;
}

inline const std::vector<std::string>& performance_columns() {
  static const std::vector<std::string> cols{"hybrid_id", "env_id", "irr", "yield"};
  return cols;
}

// Returns an empty string when the day is valid, otherwise the reason.
inline std::string check_weather(const DailyWeather& w) {
  if (!(std::isfinite(w.tmax) && std::isfinite(w.tmin) && std::isfinite(w.tmean) && std::isfinite(w.prec) &&
        std::isfinite(w.srad) && std::isfinite(w.swe) && std::isfinite(w.vp) && std::isfinite(w.dayl)))
    return "non-finite value";
  if (w.tmin > w.tmax) return "tmin > tmax";
  if (w.tmean < w.tmin || w.tmean > w.tmax) return "tmean outside [tmin, tmax]";
  if (w.prec < 0.0) return "prec < 0";
  if (w.swe < 0.0) return "swe < 0";
  if (w.vp < 0.0) return "vp < 0";
  if (w.dayl < 0.0 || w.dayl > 86400.0) return "dayl outside [0, 86400]";
  return {};
}

inline std::string check_environment_static(const Environment& e) {
  if (e.harvest_day <= e.planting_day) return "harvest_day must be after planting_day";
  if (std::abs(e.clay + e.silt + e.sand - 100.0) > 1.0) return "clay + silt + sand must be 100 within 1%";
  if (!(e.awc > 0.0 && e.awc < 1.0)) return "awc must lie in (0, 1)";
  if (!(e.ksat > 0.0)) return "ksat must be positive";
  for (double v : {e.elev, e.ph, e.om, e.cec})
    if (!std::isfinite(v)) return "non-finite static feature";
  return {};
}

inline bool valid_id(const std::string& id) {
  return !id.empty() && id.find_first_of(",\"\n\r") == std::string::npos;
}

// Environments and instances with dense indices. Environment order is the
// order of first appearance; hybrid indices follow the performance table.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Environment> envs, std::vector<PlantingInstance> instances)
      : environments_(std::move(envs)), instances_(std::move(instances)) {
    index();
  }

  const std::vector<Environment>& environments() const { return environments_; }
  const std::vector<PlantingInstance>& instances() const { return instances_; }
  const std::vector<std::string>& hybrid_ids() const { return hybrid_ids_; }

  std::size_t num_hybrids() const { return hybrid_ids_.size(); }
  std::size_t num_environments() const { return environments_.size(); }
  std::size_t num_instances() const { return instances_.size(); }

  std::size_t hybrid_of(std::size_t instance) const { return instance_hybrid_[instance]; }
  std::size_t env_of(std::size_t instance) const { return instance_env_[instance]; }
  const Environment& environment_of(std::size_t instance) const { return environments_[instance_env_[instance]]; }

  std::size_t hybrid_index(const std::string& id) const {
    auto it = hybrid_lookup_.find(id);
    if (it == hybrid_lookup_.end()) fail(ErrorKind::lookup, "unknown hybrid '" + id + "'");
    return it->second;
  }
  std::size_t env_index(const std::string& id) const {
    auto it = env_lookup_.find(id);
    if (it == env_lookup_.end()) fail(ErrorKind::lookup, "unknown environment '" + id + "'");
    return it->second;
  }
  bool has_env(const std::string& id) const { return env_lookup_.count(id) != 0; }

  // Instance indices grouped by hybrid, in instance order.
  const std::vector<std::vector<std::size_t>>& instances_by_hybrid() const { return by_hybrid_; }

  std::vector<std::string> env_ids() const {
    std::vector<std::string> out;
    out.reserve(environments_.size());
    for (const auto& e : environments_) out.push_back(e.env_id);
    return out;
  }

 private:
  void index() {
    for (std::size_t i = 0; i < environments_.size(); ++i) {
      const auto& e = environments_[i];
      if (!valid_id(e.env_id)) fail(ErrorKind::validation, "invalid environment id '" + e.env_id + "'");
      if (!env_lookup_.emplace(e.env_id, i).second)
        fail(ErrorKind::validation, "duplicate environment '" + e.env_id + "'");
      if (auto why = check_environment_static(e); !why.empty())
        fail(ErrorKind::validation, "environment '" + e.env_id + "': " + why);
      if (static_cast<int>(e.weather.size()) != e.season_length())
        fail(ErrorKind::validation, "environment '" + e.env_id + "': weather has " + std::to_string(e.weather.size()) +
                                        " days, expected " + std::to_string(e.season_length()));
      for (std::size_t d = 0; d < e.weather.size(); ++d) {
        if (e.weather[d].day_index != static_cast<int>(d))
          fail(ErrorKind::validation, "environment '" + e.env_id + "': weather days not contiguous");
        if (auto why = check_weather(e.weather[d]); !why.empty())
          fail(ErrorKind::validation, "environment '" + e.env_id + "' day " + std::to_string(d) + ": " + why);
      }
    }
    for (std::size_t p = 0; p < instances_.size(); ++p) {
      const auto& inst = instances_[p];
      auto it = env_lookup_.find(inst.env_id);
      if (it == env_lookup_.end())
        fail(ErrorKind::referential, "instance " + std::to_string(p) + " references unknown environment '" +
                                         inst.env_id + "'");
      if (!valid_id(inst.hybrid_id)) fail(ErrorKind::validation, "invalid hybrid id '" + inst.hybrid_id + "'");
      if (inst.irr < 0 || inst.irr > 3)
        fail(ErrorKind::validation, "instance " + std::to_string(p) + ": irr must be an integer in [0, 3]");
      if (!(inst.yield_obs >= 0.0) || !std::isfinite(inst.yield_obs))
        fail(ErrorKind::validation, "instance " + std::to_string(p) + ": yield must be finite and >= 0");
      auto [h, inserted] = hybrid_lookup_.emplace(inst.hybrid_id, hybrid_ids_.size());
      if (inserted) {
        hybrid_ids_.push_back(inst.hybrid_id);
        by_hybrid_.emplace_back();
      }
      instance_hybrid_.push_back(h->second);
      instance_env_.push_back(it->second);
      by_hybrid_[h->second].push_back(p);
    }
  }

  std::vector<Environment> environments_;
  std::vector<PlantingInstance> instances_;
  std::vector<std::string> hybrid_ids_;
  std::vector<std::size_t> instance_hybrid_;
  std::vector<std::size_t> instance_env_;
  std::vector<std::vector<std::size_t>> by_hybrid_;
  std::unordered_map<std::string, std::size_t> hybrid_lookup_;
  std::unordered_map<std::string, std::size_t> env_lookup_;
};

// Reads the three tables. The weather `day` column holds calendar day numbers
// in [planting_day, harvest_day]; rows may appear in any order. An empty swe
// cell is read as 0.
inline Dataset load_dataset(const std::string& weather_csv, const std::string& environment_csv,
                            const std::string& performance_csv) {
  const auto env_t = csv::read_file(environment_csv);
  env_t.require(environment_columns());
  const auto wx_t = csv::read_file(weather_csv);
  wx_t.require(weather_columns());
  const auto perf_t = csv::read_file(performance_csv);
  perf_t.require(performance_columns());

  std::vector<Environment> envs;
  std::unordered_map<std::string, std::size_t> env_pos;
  {
    const auto c = [&](const char* n) { return env_t.column(n); };
    for (std::size_t r = 0; r < env_t.rows.size(); ++r) {
      Environment e;
      e.env_id = env_t.cell(r, c("env_id"));
      e.planting_day = static_cast<int>(env_t.integer(r, c("planting_day")));
      e.harvest_day = static_cast<int>(env_t.integer(r, c("harvest_day")));
      e.elev = env_t.number(r, c("elev"));
      e.clay = env_t.number(r, c("clay"));
      e.silt = env_t.number(r, c("silt"));
      e.sand = env_t.number(r, c("sand"));
      e.awc = env_t.number(r, c("awc"));
      e.ph = env_t.number(r, c("ph"));
      e.om = env_t.number(r, c("om"));
      e.cec = env_t.number(r, c("cec"));
      e.ksat = env_t.number(r, c("ksat"));
      if (auto why = check_environment_static(e); !why.empty()) fail(ErrorKind::validation, env_t.where(r) + ": " + why);
      if (!env_pos.emplace(e.env_id, envs.size()).second)
        fail(ErrorKind::validation, env_t.where(r) + ": duplicate env_id '" + e.env_id + "'");
      envs.push_back(std::move(e));
    }
  }

  std::vector<std::vector<std::pair<DailyWeather, std::size_t>>> days(envs.size());
  {
    const auto c = [&](const char* n) { return wx_t.column(n); };
    for (std::size_t r = 0; r < wx_t.rows.size(); ++r) {
      const auto& id = wx_t.cell(r, c("env_id"));
      auto it = env_pos.find(id);
      if (it == env_pos.end())
        fail(ErrorKind::referential, wx_t.where(r) + ": weather row for unknown env_id '" + id + "'");
      const auto& env = envs[it->second];
      const long day = wx_t.integer(r, c("day"));
      if (day < env.planting_day || day > env.harvest_day)
        fail(ErrorKind::validation, wx_t.where(r) + ": day " + std::to_string(day) + " outside planting..harvest");
      DailyWeather w;
      w.day_index = static_cast<int>(day - env.planting_day);
      w.tmax = wx_t.number(r, c("tmax"));
      w.tmin = wx_t.number(r, c("tmin"));
      w.tmean = wx_t.number(r, c("tmean"));
      w.prec = wx_t.number(r, c("prec"));
      w.srad = wx_t.number(r, c("srad"));
      w.swe = wx_t.cell(r, c("swe")).empty() ? 0.0 : wx_t.number(r, c("swe"));
      w.vp = wx_t.number(r, c("vp"));
      w.dayl = wx_t.number(r, c("dayl"));
      if (auto why = check_weather(w); !why.empty()) fail(ErrorKind::validation, wx_t.where(r) + ": " + why);
      days[it->second].emplace_back(w, r);
    }
  }
  for (std::size_t i = 0; i < envs.size(); ++i) {
    auto& v = days[i];
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first.day_index < b.first.day_index; });
    for (std::size_t d = 1; d < v.size(); ++d)
      if (v[d].first.day_index == v[d - 1].first.day_index)
        fail(ErrorKind::validation, wx_t.where(v[d].second) + ": duplicate day for env '" + envs[i].env_id + "'");
    if (static_cast<int>(v.size()) != envs[i].season_length())
      fail(ErrorKind::validation, weather_csv + ": environment '" + envs[i].env_id + "' has " +
                                      std::to_string(v.size()) + " weather rows, expected " +
                                      std::to_string(envs[i].season_length()));
    envs[i].weather.reserve(v.size());
    for (auto& [w, r] : v) envs[i].weather.push_back(w);
  }

  std::vector<PlantingInstance> instances;
  {
    const auto c = [&](const char* n) { return perf_t.column(n); };
    for (std::size_t r = 0; r < perf_t.rows.size(); ++r) {
      PlantingInstance p;
      p.hybrid_id = perf_t.cell(r, c("hybrid_id"));
      p.env_id = perf_t.cell(r, c("env_id"));
      if (!env_pos.count(p.env_id))
        fail(ErrorKind::referential, perf_t.where(r) + ": unknown env_id '" + p.env_id + "'");
      const long irr = perf_t.integer(r, c("irr"));
      if (irr < 0 || irr > 3) fail(ErrorKind::validation, perf_t.where(r) + ": irr must be in [0, 3]");
      p.irr = static_cast<int>(irr);
      p.yield_obs = perf_t.number(r, c("yield"));
      if (p.yield_obs < 0.0) fail(ErrorKind::validation, perf_t.where(r) + ": yield must be >= 0");
      instances.push_back(std::move(p));
    }
  }
  return Dataset(std::move(envs), std::move(instances));
}

struct DatasetPaths {
  std::filesystem::path weather, environments, performance;

  static DatasetPaths in(const std::filesystem::path& dir) {
    return {dir / "weather.csv", dir / "environments.csv", dir / "performance.csv"};
  }
};

inline void write_weather_csv(const Dataset& ds, std::ostream& out) {
  csv::Writer w(out);
  for (const auto& c : weather_columns()) w.field(c);
  w.end_row();
  for (const auto& e : ds.environments())
    for (const auto& d : e.weather) {
      w.field(e.env_id).field(e.planting_day + d.day_index).field(d.tmax).field(d.tmin).field(d.tmean);
      w.field(d.prec).field(d.srad).field(d.swe).field(d.vp).field(d.dayl);
      w.end_row();
    }
}

inline void write_environment_csv(const Dataset& ds, std::ostream& out) {
  csv::Writer w(out);
  for (const auto& c : environment_columns()) w.field(c);
  w.end_row();
  for (const auto& e : ds.environments()) {
    w.field(e.env_id).field(e.planting_day).field(e.harvest_day).field(e.elev).field(e.clay).field(e.silt);
    w.field(e.sand).field(e.awc).field(e.ph).field(e.om).field(e.cec).field(e.ksat);
    w.end_row();
  }
}

inline void write_performance_csv(const Dataset& ds, std::ostream& out) {
  csv::Writer w(out);
  for (const auto& c : performance_columns()) w.field(c);
  w.end_row();
  for (const auto& p : ds.instances()) {
    w.field(p.hybrid_id).field(p.env_id).field(p.irr).field(p.yield_obs);
    w.end_row();
  }
}

inline void write_dataset(const Dataset& ds, const DatasetPaths& paths) {
  const auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(paths.weather);
    write_weather_csv(ds, f);
  }
  {
    auto f = open(paths.environments);
    write_environment_csv(ds, f);
  }
  {
    auto f = open(paths.performance);
    write_performance_csv(ds, f);
  }
}

inline Dataset load_dataset(const DatasetPaths& paths) {
  return load_dataset(paths.weather.string(), paths.environments.string(), paths.performance.string());
}

}  // namespace agrostress
