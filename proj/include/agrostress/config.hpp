#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "agrostress/analysis.hpp"
#include "agrostress/dem_stress.hpp"
#include "agrostress/error.hpp"
#include "agrostress/growth.hpp"
#include "agrostress/manifest.hpp"
#include "agrostress/nn/model.hpp"
#include "agrostress/nn/train.hpp"
#include "agrostress/sensitivity.hpp"
#include "agrostress/synth.hpp"

namespace agrostress {

namespace detail {

// Reads typed keys out of one TOML table, reporting failures with their full
// dotted path, and rejects keys nobody asked for.
class TomlSection {
 public:
  TomlSection(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool has(const std::string& key) const { return table_ && table_->contains(key); }

  TomlSection sub(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return TomlSection(nullptr, full(key));
    const auto* t = table_->get(key)->as_table();
    if (!t) fail(ErrorKind::config, full(key) + ": expected a table");
    return TomlSection(t, full(key));
  }

  void get(const std::string& key, double& dst) {
    if (const auto* n = node(key)) {
      if (const auto* f = n->as_floating_point())
        dst = f->get();
      else if (const auto* i = n->as_integer())
        dst = static_cast<double>(i->get());
      else
        fail(ErrorKind::config, full(key) + ": expected a number");
    }
  }
  void get(const std::string& key, int& dst) {
    if (const auto* n = node(key)) {
      const auto* i = n->as_integer();
      if (!i) fail(ErrorKind::config, full(key) + ": expected an integer");
      dst = static_cast<int>(i->get());
    }
  }
  void get(const std::string& key, std::uint64_t& dst) {
    if (const auto* n = node(key)) {
      const auto* i = n->as_integer();
      if (!i || i->get() < 0) fail(ErrorKind::config, full(key) + ": expected a non-negative integer");
      dst = static_cast<std::uint64_t>(i->get());
    }
  }
  void get(const std::string& key, bool& dst) {
    if (const auto* n = node(key)) {
      const auto* b = n->as_boolean();
      if (!b) fail(ErrorKind::config, full(key) + ": expected true or false");
      dst = b->get();
    }
  }
  void get(const std::string& key, std::string& dst) {
    if (const auto* n = node(key)) {
      const auto* s = n->as_string();
      if (!s) fail(ErrorKind::config, full(key) + ": expected a string");
      dst = s->get();
    }
  }
  void get(const std::string& key, std::vector<double>& dst) {
    if (const auto* n = node(key)) {
      const auto* a = n->as_array();
      if (!a) fail(ErrorKind::config, full(key) + ": expected an array of numbers");
      dst.clear();
      for (std::size_t k = 0; k < a->size(); ++k) {
        const auto* e = a->get(k);
        if (const auto* f = e->as_floating_point())
          dst.push_back(f->get());
        else if (const auto* i = e->as_integer())
          dst.push_back(static_cast<double>(i->get()));
        else
          fail(ErrorKind::config, full(key) + "[" + std::to_string(k) + "]: expected a number");
      }
    }
  }
  void get(const std::string& key, std::vector<int>& dst) {
    if (const auto* n = node(key)) {
      const auto* a = n->as_array();
      if (!a) fail(ErrorKind::config, full(key) + ": expected an array of integers");
      dst.clear();
      for (std::size_t k = 0; k < a->size(); ++k) {
        const auto* i = a->get(k)->as_integer();
        if (!i) fail(ErrorKind::config, full(key) + "[" + std::to_string(k) + "]: expected an integer");
        dst.push_back(static_cast<int>(i->get()));
      }
    }
  }
  template <std::size_t N>
  void get(const std::string& key, std::array<double, N>& dst) {
    if (!has(key)) {
      seen_.insert(key);
      return;
    }
    std::vector<double> v;
    get(key, v);
    if (v.size() != N) fail(ErrorKind::config, full(key) + ": expected " + std::to_string(N) + " numbers");
    std::copy(v.begin(), v.end(), dst.begin());
  }

  // Errors on keys that were never read.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_)
      if (!seen_.count(std::string(k.str()))) fail(ErrorKind::config, full(std::string(k.str())) + ": unknown key");
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const toml::node* node(const std::string& key) {
    seen_.insert(key);
    return has(key) ? table_->get(key) : nullptr;
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

struct DataConfig {
  std::string source = "synth";  // "synth" or "files"
  std::filesystem::path weather, environments, performance;
};

struct SensitivityConfig {
  sensitivity::EnvFilter filter;
  bool train_only = false;  // restrict R to training instances
};

struct AnalysisConfig {
  analysis::Norm norm = analysis::Norm::l2;
  analysis::KMeansConfig kmeans;
  std::string cluster_on = "R";  // "R" (model gradients) or "C" (DEM covariance)
};

struct RunConfig {
  std::filesystem::path config_path;
  std::uint64_t seed = 7;
  std::filesystem::path out = "runs";
  std::string run_id;
  int threads = 1;

  DataConfig data;
  SynthConfig synth;
  GrowthParams growth;
  dem::DemParams dem;
  bool ksat_bounds_from_data = true;
  nn::ModelSpec model;
  nn::TrainConfig train;
  SensitivityConfig sensitivity;
  AnalysisConfig analysis;

  // Everything that affects results, excluding the seed, output location and
  // thread count.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["data"] = {{"source", data.source}};
    if (data.source == "files")
      j["data"].update({{"weather", portable(data.weather)},
                        {"environments", portable(data.environments)},
                        {"performance", portable(data.performance)}});
    const auto& s = synth;
    j["synth"] = {{"n_hybrids", s.n_hybrids},
                  {"n_envs", s.n_envs},
                  {"instances_per_hybrid", s.instances_per_hybrid},
                  {"susceptible_fraction", s.susceptible_fraction},
                  {"label_layout", to_string(s.label_layout)},
                  {"season_length", s.season_length},
                  {"season_jitter", s.season_jitter},
                  {"heat_wave_probability", s.heat_wave_probability},
                  {"dry_spell_probability", s.dry_spell_probability},
                  {"heat_wave_amplitude", s.heat_wave_amplitude},
                  {"heat_wave_start", s.heat_wave_start},
                  {"heat_wave_length", s.heat_wave_length},
                  {"dry_spell_start", s.dry_spell_start},
                  {"dry_spell_length", s.dry_spell_length},
                  {"dry_spell_humidity_drop", s.dry_spell_humidity_drop},
                  {"irrigation_weights", s.irrigation_weights},
                  {"rain_probability", s.rain_probability},
                  {"rain_mean", s.rain_mean},
                  {"max_yield", {s.max_yield_lo, s.max_yield_hi}},
                  {"heat_penalty", {s.heat_penalty_lo, s.heat_penalty_hi}},
                  {"drought_penalty", {s.drought_penalty_lo, s.drought_penalty_hi}},
                  {"yield_noise", s.yield_noise}};
    j["growth"] = {{"t_base", growth.t_base}, {"gdu_mode", to_string(growth.mode)}, {"clamp", growth.clamp}};
    j["dem"] = {{"temp", dem.heat.temp},
                {"heat", dem.heat.heat},
                {"cold", dem.heat.cold},
                {"a0", dem.heat.a0},
                {"a1", dem.heat.a1},
                {"p", dem.drought.p},
                {"q", dem.drought.q},
                {"initial_aw_fraction", dem.drought.initial_aw_fraction},
                {"combine", dem::to_string(dem.combine)}};
    if (!ksat_bounds_from_data) j["dem"].update({{"ksat_min", dem.drought.ksat_min}, {"ksat_max", dem.drought.ksat_max}});
    j["model"] = {{"kind", nn::to_string(model.kind)},
                  {"hidden", model.hidden},
                  {"filter_height", model.filter_height},
                  {"stride", model.stride},
                  {"d_max", model.d_max},
                  {"heat_activation", nn::to_string(model.heat_activation)},
                  {"drought_activation", nn::to_string(model.drought_activation)}};
    j["train"] = {{"rho", train.rho},
                  {"epsilon", train.epsilon},
                  {"batch_size", train.batch_size},
                  {"epochs", train.epochs},
                  {"test_fraction", train.test_fraction}};
    j["sensitivity"] = {{"filter", sensitivity::to_string(sensitivity.filter.kind)},
                        {"warm_threshold", sensitivity.filter.warm_threshold},
                        {"train_only", sensitivity.train_only}};
    j["analysis"] = {{"norm", analysis::to_string(analysis.norm)},
                     {"k", analysis.kmeans.k},
                     {"restarts", analysis.kmeans.restarts},
                     {"max_iterations", analysis.kmeans.max_iterations},
                     {"cluster_on", analysis.cluster_on}};
    return j;
  }

  // Input paths relative to the config file, so the hash does not depend on
  // where the project is checked out.
  std::string portable(const std::filesystem::path& p) const {
    const auto base = config_path.parent_path();
    return (base.empty() ? p : p.lexically_relative(base)).generic_string();
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }

  std::filesystem::path run_dir() const {
    return out / (run_id.empty() ? "seed" + std::to_string(seed) + "-" + hash().substr(0, 12) : run_id);
  }

  void validate() const {
    if (data.source != "synth" && data.source != "files")
      fail(ErrorKind::config, "data.source: expected \"synth\" or \"files\"");
    if (data.source == "files") {
      const std::pair<const char*, const std::filesystem::path*> paths[] = {
          {"data.weather", &data.weather}, {"data.environments", &data.environments}, {"data.performance", &data.performance}};
      for (const auto& [name, p] : paths) {
        if (p->empty()) fail(ErrorKind::config, std::string(name) + ": required when data.source = \"files\"");
        if (!std::filesystem::exists(*p)) fail(ErrorKind::config, std::string(name) + ": no such file '" + p->string() + "'");
      }
    }
    if (threads < 1) fail(ErrorKind::config, "threads: must be >= 1");
    if (analysis.cluster_on != "R" && analysis.cluster_on != "C")
      fail(ErrorKind::config, "analysis.cluster_on: expected \"R\" or \"C\"");
    try {
      synth.validate();
      dem.validate();
      auto m = model;
      if (m.kind == nn::ModelKind::cnn_mlp && m.d_max == 0) m.d_max = m.filter_height;
      m.validate();
      train.validate();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parameter) fail(ErrorKind::config, e.what());
      throw;
    }
  }
};

inline RunConfig parse_run_config(const toml::table& root, const std::filesystem::path& base_dir) {
  RunConfig c;
  detail::TomlSection top(&root, "");
  top.get("seed", c.seed);
  std::string out;
  top.get("out", out);
  if (!out.empty()) c.out = base_dir / out;
  else c.out = base_dir / "runs";
  top.get("run_id", c.run_id);
  top.get("threads", c.threads);

  {
    auto s = top.sub("data");
    s.get("source", c.data.source);
    std::string w, e, p;
    s.get("weather", w);
    s.get("environments", e);
    s.get("performance", p);
    std::string dir;
    s.get("dir", dir);
    if (!dir.empty()) {
      if (w.empty()) w = dir + "/weather.csv";
      if (e.empty()) e = dir + "/environments.csv";
      if (p.empty()) p = dir + "/performance.csv";
    }
    if (!w.empty()) c.data.weather = base_dir / w;
    if (!e.empty()) c.data.environments = base_dir / e;
    if (!p.empty()) c.data.performance = base_dir / p;
    s.finish();
  }
  {
    auto s = top.sub("synth");
    auto& y = c.synth;
    s.get("n_hybrids", y.n_hybrids);
    s.get("n_envs", y.n_envs);
    s.get("instances_per_hybrid", y.instances_per_hybrid);
    s.get("susceptible_fraction", y.susceptible_fraction);
    std::string layout = to_string(y.label_layout);
    s.get("label_layout", layout);
    try {
      y.label_layout = parse_label_layout(layout);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("label_layout") + ": " + e.what());
    }
    s.get("season_length", y.season_length);
    s.get("season_jitter", y.season_jitter);
    s.get("heat_wave_probability", y.heat_wave_probability);
    s.get("dry_spell_probability", y.dry_spell_probability);
    s.get("heat_wave_amplitude", y.heat_wave_amplitude);
    s.get("heat_wave_start", y.heat_wave_start);
    s.get("heat_wave_length", y.heat_wave_length);
    s.get("dry_spell_start", y.dry_spell_start);
    s.get("dry_spell_length", y.dry_spell_length);
    s.get("dry_spell_humidity_drop", y.dry_spell_humidity_drop);
    s.get("irrigation_weights", y.irrigation_weights);
    s.get("rain_probability", y.rain_probability);
    s.get("rain_mean", y.rain_mean);
    std::array<double, 2> range{y.max_yield_lo, y.max_yield_hi};
    s.get("max_yield", range);
    y.max_yield_lo = range[0];
    y.max_yield_hi = range[1];
    range = {y.heat_penalty_lo, y.heat_penalty_hi};
    s.get("heat_penalty", range);
    y.heat_penalty_lo = range[0];
    y.heat_penalty_hi = range[1];
    range = {y.drought_penalty_lo, y.drought_penalty_hi};
    s.get("drought_penalty", range);
    y.drought_penalty_lo = range[0];
    y.drought_penalty_hi = range[1];
    s.get("yield_noise", y.yield_noise);
    s.finish();
  }
  {
    auto s = top.sub("growth");
    s.get("t_base", c.growth.t_base);
    std::string mode = to_string(c.growth.mode);
    s.get("gdu_mode", mode);
    try {
      c.growth.mode = parse_gdu_mode(mode);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("gdu_mode") + ": " + e.what());
    }
    s.get("clamp", c.growth.clamp);
    s.finish();
  }
  {
    auto s = top.sub("dem");
    s.get("temp", c.dem.heat.temp);
    s.get("heat", c.dem.heat.heat);
    s.get("cold", c.dem.heat.cold);
    s.get("a0", c.dem.heat.a0);
    s.get("a1", c.dem.heat.a1);
    s.get("p", c.dem.drought.p);
    s.get("q", c.dem.drought.q);
    s.get("initial_aw_fraction", c.dem.drought.initial_aw_fraction);
    if (s.has("ksat_min") || s.has("ksat_max")) {
      if (!(s.has("ksat_min") && s.has("ksat_max")))
        fail(ErrorKind::config, "dem.ksat_min and dem.ksat_max must be given together");
      c.ksat_bounds_from_data = false;
    }
    s.get("ksat_min", c.dem.drought.ksat_min);
    s.get("ksat_max", c.dem.drought.ksat_max);
    std::string combine = dem::to_string(c.dem.combine);
    s.get("combine", combine);
    try {
      c.dem.combine = dem::parse_combine_kind(combine);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("combine") + ": " + e.what());
    }
    s.finish();
  }
  {
    auto s = top.sub("model");
    std::string kind = nn::to_string(c.model.kind);
    s.get("kind", kind);
    try {
      c.model.kind = nn::parse_model_kind(kind);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("kind") + ": " + e.what());
    }
    c.model.hidden = nn::default_hidden(c.model.kind);
    s.get("hidden", c.model.hidden);
    s.get("filter_height", c.model.filter_height);
    s.get("stride", c.model.stride);
    s.get("d_max", c.model.d_max);
    std::string ha = nn::to_string(c.model.heat_activation), da = nn::to_string(c.model.drought_activation);
    s.get("heat_activation", ha);
    s.get("drought_activation", da);
    try {
      c.model.heat_activation = nn::parse_activation(ha);
      c.model.drought_activation = nn::parse_activation(da);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("activation") + ": " + e.what());
    }
    c.model.combine = c.dem.combine;
    s.finish();
  }
  {
    auto s = top.sub("train");
    s.get("rho", c.train.rho);
    s.get("epsilon", c.train.epsilon);
    s.get("batch_size", c.train.batch_size);
    s.get("epochs", c.train.epochs);
    s.get("test_fraction", c.train.test_fraction);
    s.finish();
  }
  {
    auto s = top.sub("sensitivity");
    std::string filter = sensitivity::to_string(c.sensitivity.filter.kind);
    s.get("filter", filter);
    try {
      c.sensitivity.filter.kind = sensitivity::parse_filter_kind(filter);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("filter") + ": " + e.what());
    }
    s.get("warm_threshold", c.sensitivity.filter.warm_threshold);
    s.get("train_only", c.sensitivity.train_only);
    s.finish();
  }
  {
    auto s = top.sub("analysis");
    std::string norm = analysis::to_string(c.analysis.norm);
    s.get("norm", norm);
    try {
      c.analysis.norm = analysis::parse_norm(norm);
    } catch (const Error& e) {
      fail(ErrorKind::config, s.full("norm") + ": " + e.what());
    }
    s.get("k", c.analysis.kmeans.k);
    s.get("restarts", c.analysis.kmeans.restarts);
    s.get("max_iterations", c.analysis.kmeans.max_iterations);
    s.get("cluster_on", c.analysis.cluster_on);
    s.finish();
  }
  top.finish();
  c.synth.filter_height = c.model.filter_height;
  return c;
}

// Applies the global seed to every seeded component.
inline void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.train.seed = seed;
  c.analysis.kmeans.seed = seed;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::config, "config file '" + path.string() + "' does not exist");
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    fail(ErrorKind::config, path.string() + ":" + std::to_string(src.begin.line) + ":" +
                                std::to_string(src.begin.column) + ": " + std::string(e.description()));
  }
  RunConfig c = parse_run_config(root, path.parent_path());
  c.config_path = path;
  apply_seed(c, c.seed);
  return c;
}

}  // namespace agrostress
