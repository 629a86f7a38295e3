#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrostress/analysis.hpp"
#include "agrostress/config.hpp"
#include "agrostress/csv.hpp"
#include "agrostress/data.hpp"
#include "agrostress/dem_stress.hpp"
#include "agrostress/growth.hpp"
#include "agrostress/manifest.hpp"
#include "agrostress/nn/bundle_io.hpp"
#include "agrostress/nn/model.hpp"
#include "agrostress/nn/train.hpp"
#include "agrostress/plots.hpp"
#include "agrostress/sensitivity.hpp"
#include "agrostress/synth.hpp"

namespace agrostress::pipeline {

namespace fs = std::filesystem;

inline constexpr std::array<const char*, 8> kCommands{"synth", "dem",     "train",   "sensitivity",
                                                      "rank",  "cluster", "compare", "eval"};
inline constexpr std::array<dem::StressKind, 3> kMatrixStresses{dem::StressKind::heat, dem::StressKind::drought,
                                                                dem::StressKind::combined};

// One run directory shared by every command invoked with the same config and
// seed. Downstream commands read what upstream commands wrote there.
class Run {
 public:
  Run(RunConfig cfg, std::ostream& log)
      : cfg_(std::move(cfg)), dir_(cfg_.run_dir()), log_(log), manifest_((fs::create_directories(dir_), dir_),
                                                                         cfg_.hash(), cfg_.seed) {
    nlohmann::json j = cfg_.to_json();
    j["seed"] = cfg_.seed;
    j["provenance"] = provenance();
    write_text("config.json", j.dump(2) + "\n", "config");
  }

  const RunConfig& config() const { return cfg_; }
  const fs::path& dir() const { return dir_; }
  std::ostream& log() { return log_; }

  nlohmann::json provenance() const {
    return {{"tool", "agrostress"}, {"version", kToolVersion}, {"config_hash", cfg_.hash()}, {"seed", cfg_.seed}};
  }
  std::string provenance_line() const {
    return std::string("agrostress ") + kToolVersion + " config " + cfg_.hash().substr(0, 12) + " seed " +
           std::to_string(cfg_.seed);
  }

  fs::path path(const fs::path& rel) const { return dir_ / rel; }

  // Writes via a callback into a file under the run directory and records it.
  void write(const fs::path& rel, const std::string& command, const std::function<void(std::ostream&)>& body) {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    {
      std::ofstream out(p, std::ios::binary);
      if (!out) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
      body(out);
      if (!out) fail(ErrorKind::io, "failed writing '" + p.string() + "'");
    }
    manifest_.record(p, command);
  }
  void write_text(const fs::path& rel, const std::string& text, const std::string& command) {
    write(rel, command, [&](std::ostream& o) { o << text; });
  }
  void write_json(const fs::path& rel, nlohmann::json j, const std::string& command) {
    j["provenance"] = provenance();
    write_text(rel, j.dump(2) + "\n", command);
  }
  void record(const fs::path& rel, const std::string& command) { manifest_.record(dir_ / rel, command); }
  void save_manifest() { manifest_.save(); }

  // Fails with a message naming the command that produces the missing file.
  void require(const fs::path& rel, const std::string& producer) const {
    if (!fs::exists(dir_ / rel))
      fail(ErrorKind::io, "missing '" + (dir_ / rel).string() + "'; run `agrostress " + producer +
                              "` with the same config and seed first");
  }

  Dataset dataset() const {
    if (cfg_.data.source == "files")
      return load_dataset(cfg_.data.weather.string(), cfg_.data.environments.string(), cfg_.data.performance.string());
    require("data/performance.csv", "synth");
    return load_dataset(DatasetPaths::in(dir_ / "data"));
  }

  dem::DemParams dem_params(const Dataset& ds) const {
    dem::DemParams p = cfg_.dem;
    if (cfg_.ksat_bounds_from_data) p.drought.freeze_ksat_bounds(ds);
    return p;
  }

 private:
  RunConfig cfg_;
  fs::path dir_;
  std::ostream& log_;
  Manifest manifest_;
};

inline void cmd_synth(Run& run) {
  const auto& cfg = run.config();
  if (cfg.data.source != "synth") fail(ErrorKind::config, "data.source: synth needs source = \"synth\"");
  const auto result = generate_synthetic(cfg.synth, cfg.seed);
  const auto& ds = result.dataset;
  run.write("data/weather.csv", "synth", [&](std::ostream& o) { write_weather_csv(ds, o); });
  run.write("data/environments.csv", "synth", [&](std::ostream& o) { write_environment_csv(ds, o); });
  run.write("data/performance.csv", "synth", [&](std::ostream& o) { write_performance_csv(ds, o); });
  run.write("data/truth.csv", "synth", [&](std::ostream& o) { write_ground_truth_csv(result.truth, o); });
  std::size_t heat = 0, drought = 0;
  for (const auto& h : result.truth.hybrids) {
    heat += h.heat_susceptible ? 1 : 0;
    drought += h.drought_susceptible ? 1 : 0;
  }
  run.write_json("data/synth.json",
                 {{"hybrids", ds.num_hybrids()},
                  {"environments", ds.num_environments()},
                  {"instances", ds.num_instances()},
                  {"heat_susceptible", heat},
                  {"drought_susceptible", drought},
                  {"dual_resistant_fraction", result.truth.dual_resistant_fraction()}},
                 "synth");
  run.log() << "synth: " << ds.num_hybrids() << " hybrids, " << ds.num_environments() << " environments, "
            << ds.num_instances() << " planting instances\n";
}

inline void write_instance_vectors(const Dataset& ds, const std::vector<dem::InstanceStress>& s, dem::StressKind k,
                                   std::ostream& out) {
  csv::Writer w(out);
  w.field("hybrid_id").field("env_id").field("irr");
  for (int t = 0; t < kNumPeriods; ++t) w.field("p" + std::to_string(t));
  w.end_row();
  for (std::size_t i = 0; i < ds.num_instances(); ++i) {
    const auto& inst = ds.instances()[i];
    w.field(inst.hybrid_id).field(inst.env_id).field(inst.irr);
    for (double v : s[i].of(k)) w.field(v);
    w.end_row();
  }
}

inline void cmd_dem(Run& run, bool emit_calendar) {
  const auto ds = run.dataset();
  const auto params = run.dem_params(ds);
  const auto calendars = build_calendars(ds, run.config().growth);
  const auto stresses = dem::instance_stresses(ds, calendars, params);
  for (auto k : dem::kAllStressKinds)
    run.write(fs::path("dem") / (std::string("stress_") + dem::to_string(k) + ".csv"), "dem",
              [&](std::ostream& o) { write_instance_vectors(ds, stresses, k, o); });
  const auto dy = sensitivity::compute_delta_yield(ds);
  run.write("dem/delta_yield.csv", "dem", [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("hybrid_id").field("env_id").field("irr").field("yield").field("delta_yield");
    w.end_row();
    for (std::size_t i = 0; i < ds.num_instances(); ++i) {
      const auto& p = ds.instances()[i];
      w.field(p.hybrid_id).field(p.env_id).field(p.irr).field(p.yield_obs).field(dy[i]);
      w.end_row();
    }
  });
  if (emit_calendar) {
    for (std::size_t e = 0; e < ds.num_environments(); ++e) {
      const auto& env = ds.environments()[e];
      const auto ws = dem::water_balance(env, calendars[e], params.drought);
      run.write(fs::path("dem/calendars") / (env.env_id + ".csv"), "dem", [&](std::ostream& o) {
        csv::Writer w(o);
        for (const char* h : {"day", "gdu", "agdu", "period", "et0", "et", "mad", "aw"}) w.field(h);
        w.end_row();
        for (std::size_t d = 0; d < env.weather.size(); ++d) {
          w.field(env.planting_day + static_cast<int>(d)).field(calendars[e].gdu[d]).field(calendars[e].agdu[d]);
          w.field(calendars[e].period[d]).field(ws.et0[d]).field(ws.et[d]).field(ws.mad[d]).field(ws.aw[d]);
          w.end_row();
        }
      });
    }
  }
  run.write_json("dem/dem.json",
                 {{"ksat_min", params.drought.ksat_min},
                  {"ksat_max", params.drought.ksat_max},
                  {"combine", dem::to_string(params.combine)},
                  {"instances", ds.num_instances()},
                  {"calendars", emit_calendar}},
                 "dem");
  run.log() << "dem: stress vectors for " << ds.num_instances() << " instances\n";
}

inline nn::ModelBundle fresh_model(const Run& run, const Dataset& ds) {
  const auto& cfg = run.config();
  return nn::init_model(cfg.model, ds, cfg.growth, run.dem_params(ds), cfg.seed);
}

inline void cmd_train(Run& run) {
  const auto& cfg = run.config();
  const auto ds = run.dataset();
  const auto targets = sensitivity::compute_delta_yield(ds);
  auto bundle = fresh_model(run, ds);
  auto tc = cfg.train;
  tc.threads = cfg.threads;
  const int every = std::max(1, tc.epochs / 10);
  const auto result = nn::train(bundle, ds, targets, tc, [&](const nn::EpochMetrics& m) {
    if (m.epoch % every == 0 || m.epoch == tc.epochs)
      run.log() << "train: epoch " << m.epoch << " train_mse " << m.train_mse << " test_mse " << m.test_mse
                << " mse/sigma " << m.test_mse_over_sigma << "\n";
  });
  fs::create_directories(run.path("model"));
  nn::save_bundle(bundle, run.path("model/model.bin"));
  run.record("model/model.bin", "train");
  run.write("model/metrics.csv", "train", [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("epoch").field("train_mse").field("test_mse").field("test_mse_over_sigma");
    w.end_row();
    for (const auto& m : result.history) {
      w.field(m.epoch).field(m.train_mse).field(m.test_mse).field(m.test_mse_over_sigma);
      w.end_row();
    }
  });
  run.write("model/split.csv", "train", [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("instance").field("hybrid_id").field("env_id").field("set");
    w.end_row();
    std::vector<bool> is_test(ds.num_instances(), false);
    for (auto i : result.split.test) is_test[i] = true;
    for (std::size_t i = 0; i < ds.num_instances(); ++i) {
      w.field(i).field(ds.instances()[i].hybrid_id).field(ds.instances()[i].env_id).field(is_test[i] ? "test" : "train");
      w.end_row();
    }
  });
  const auto& last = result.history.back();
  run.write_json("model/model.json",
                 {{"kind", nn::to_string(bundle.spec.kind)},
                  {"parameters", bundle.params.size()},
                  {"stress_length", bundle.spec.stress_length()},
                  {"epochs", tc.epochs},
                  {"train_instances", result.split.train.size()},
                  {"test_instances", result.split.test.size()},
                  {"train_mse", last.train_mse},
                  {"test_mse", last.test_mse},
                  {"test_mse_over_sigma", last.test_mse_over_sigma}},
                 "train");
}

inline void write_matrix(Run& run, const sensitivity::SensitivityMatrix& m) {
  const fs::path base = fs::path("sensitivity") / m.kind;
  run.write(base.string() + ".csv", "sensitivity", [&](std::ostream& o) { sensitivity::write_matrix_csv(m, o); });
  run.write_json(base.string() + ".json", sensitivity::matrix_descriptor(m), "sensitivity");
}

inline nn::ModelBundle load_model(const Run& run) {
  run.require("model/model.bin", "train");
  return nn::load_bundle(run.path("model/model.bin"));
}

inline void cmd_sensitivity(Run& run) {
  const auto& cfg = run.config();
  const auto ds = run.dataset();
  const auto dy = sensitivity::compute_delta_yield(ds);
  const auto calendars = build_calendars(ds, cfg.growth);
  const auto stresses = dem::instance_stresses(ds, calendars, run.dem_params(ds));
  for (auto k : kMatrixStresses) {
    std::vector<dem::StressVector18> v;
    v.reserve(stresses.size());
    for (const auto& s : stresses) v.push_back(s.of(k));
    write_matrix(run, sensitivity::covariance_matrix(ds, v, dy, cfg.sensitivity.filter,
                                                      std::string("C_") + sensitivity::stress_suffix(k)));
  }
  if (!fs::exists(run.path("model/model.bin"))) {
    run.log() << "sensitivity: no trained model in the run directory, wrote C matrices only (run `agrostress train` "
                 "for R)\n";
    return;
  }
  const auto bundle = load_model(run);
  const auto pd = nn::prepare(bundle, ds);
  std::vector<std::size_t> instances;
  if (cfg.sensitivity.train_only) {
    instances = nn::make_split(ds.num_instances(), bundle.test_fraction, bundle.seed).train;
  } else {
    for (std::size_t i = 0; i < ds.num_instances(); ++i) instances.push_back(i);
  }
  for (auto k : kMatrixStresses)
    write_matrix(run,
                 sensitivity::susceptibility_matrix(bundle, pd, ds, k, instances, cfg.sensitivity.filter, cfg.threads));
  run.log() << "sensitivity: C and R matrices for " << ds.num_hybrids() << " hybrids\n";
}

inline std::vector<std::string> matrix_kinds() {
  std::vector<std::string> out;
  for (const char* p : {"C_", "R_"})
    for (auto k : kMatrixStresses) out.push_back(p + std::string(sensitivity::stress_suffix(k)));
  return out;
}

inline sensitivity::SensitivityMatrix load_matrix(const Run& run, const std::string& kind) {
  const fs::path rel = fs::path("sensitivity") / (kind + ".csv");
  run.require(rel, kind[0] == 'R' ? "train` and `agrostress sensitivity" : "sensitivity");
  auto m = sensitivity::read_matrix_csv(run.path(rel), kind);
  const auto desc = nlohmann::json::parse(read_bytes(run.path(fs::path("sensitivity") / (kind + ".json"))));
  m.columns = desc.value("column_semantics", "");
  return m;
}

inline void cmd_rank(Run& run) {
  const auto norm = run.config().analysis.norm;
  int written = 0;
  for (const auto& kind : matrix_kinds()) {
    if (!fs::exists(run.path(fs::path("sensitivity") / (kind + ".csv")))) continue;
    const auto m = load_matrix(run, kind);
    const auto r = analysis::rank_hybrids(m, norm);
    run.write(fs::path("analysis") / ("rank_" + kind + ".csv"), "rank",
              [&](std::ostream& o) { analysis::write_ranking_csv(r, o); });
    run.write(fs::path("analysis") / ("heatmap_" + kind + ".svg"), "rank",
              [&](std::ostream& o) { plots::heatmap_svg(m, r.order, o, run.provenance_line()); });
    ++written;
  }
  if (written == 0) run.require("sensitivity/C_heat.csv", "sensitivity");
  run.log() << "rank: ranked " << written << " matrices by " << analysis::to_string(norm) << "\n";
}

inline void cmd_cluster(Run& run) {
  const auto& cfg = run.config();
  nlohmann::json summary;
  std::vector<analysis::ClusterResult> dual;
  for (auto k : kMatrixStresses) {
    const std::string stress = sensitivity::stress_suffix(k);
    const auto m = load_matrix(run, cfg.analysis.cluster_on + "_" + stress);
    const auto c = analysis::kmeans_cluster(m, cfg.analysis.kmeans);
    run.write(fs::path("analysis") / ("clusters_" + stress + ".csv"), "cluster",
              [&](std::ostream& o) { analysis::write_clusters_csv(c, o); });
    std::size_t n_sus = 0;
    for (bool s : c.susceptible) n_sus += s ? 1 : 0;
    summary[stress] = {{"matrix", m.kind},
                       {"silhouette", c.silhouette},
                       {"inertia", c.inertia},
                       {"iterations", c.iterations},
                       {"susceptible", n_sus},
                       {"resistant", c.susceptible.size() - n_sus}};
    if (k != dem::StressKind::combined) dual.push_back(c);
    run.log() << "cluster: " << stress << " silhouette " << c.silhouette << ", " << n_sus << " susceptible\n";
  }
  summary["resistant_fraction_heat_and_drought"] = analysis::resistant_fraction(dual);
  summary["kmeans"] = {{"k", cfg.analysis.kmeans.k},
                       {"restarts", cfg.analysis.kmeans.restarts},
                       {"seed", cfg.analysis.kmeans.seed}};
  run.write_json("analysis/clusters.json", summary, "cluster");
}

inline void cmd_compare(Run& run) {
  const auto norm = run.config().analysis.norm;
  nlohmann::json summary;
  for (auto k : kMatrixStresses) {
    const std::string stress = sensitivity::stress_suffix(k);
    const auto a = analysis::rank_hybrids(load_matrix(run, "C_" + stress), norm);
    const auto b = analysis::rank_hybrids(load_matrix(run, "R_" + stress), norm);
    const auto c = analysis::compare_rankings(a, b);
    run.write(fs::path("analysis") / ("compare_" + stress + ".csv"), "compare",
              [&](std::ostream& o) { analysis::write_comparison_csv(c, o); });
    run.write(fs::path("analysis") / ("scatter_" + stress + ".svg"), "compare", [&](std::ostream& o) {
      plots::scatter_svg(c, o, "C_" + stress, "R_" + stress, run.provenance_line());
    });
    summary[stress] = {{"spearman", c.spearman}, {"a", "C_" + stress}, {"b", "R_" + stress}};
    run.log() << "compare: " << stress << " Spearman " << c.spearman << "\n";
  }
  run.write_json("analysis/compare.json", summary, "compare");
}

// Agreement between two binary labelings, maximized over label swap.
inline double label_accuracy(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) fail(ErrorKind::pairing, "label vectors differ in length");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) agree += predicted[i] == truth[i] ? 1 : 0;
  const double a = static_cast<double>(agree) / static_cast<double>(truth.size());
  return std::max(a, 1.0 - a);
}

inline void cmd_eval(Run& run) {
  const auto ds = run.dataset();
  const auto targets = sensitivity::compute_delta_yield(ds);
  const auto bundle = load_model(run);
  const auto pd = nn::prepare(bundle, ds);
  const auto split = nn::make_split(ds.num_instances(), bundle.test_fraction, bundle.seed);
  const auto pred = nn::predict_all(bundle, pd);
  const double test_mse = nn::mean_squared_error(pred, targets, split.test);
  const double var = nn::population_variance(targets, split.test);
  nlohmann::json report;
  report["regression"] = {{"model", nn::to_string(bundle.spec.kind)},
                          {"train_mse", nn::mean_squared_error(pred, targets, split.train)},
                          {"test_mse", test_mse},
                          {"test_sigma", std::sqrt(var)},
                          {"test_mse_over_sigma", var > 0.0 ? test_mse / var : 0.0}};
  run.log() << "eval: test MSE/sigma " << (var > 0.0 ? test_mse / var : 0.0) << "\n";

  run.require("analysis/clusters_heat.csv", "cluster");
  std::vector<analysis::ClusterResult> clusters;
  for (const char* s : {"heat", "drought"})
    clusters.push_back(analysis::read_clusters_csv(run.path(fs::path("analysis") / ("clusters_" + std::string(s) + ".csv")).string()));
  report["clustering"] = {{"resistant_fraction", analysis::resistant_fraction(clusters)}};
  if (fs::exists(run.path("data/truth.csv"))) {
    const auto truth = read_ground_truth_csv(run.path("data/truth.csv").string());
    if (truth.hybrid_ids != clusters[0].hybrid_ids) fail(ErrorKind::pairing, "ground truth and clusters list different hybrids");
    std::vector<bool> heat, drought;
    for (const auto& h : truth.hybrids) {
      heat.push_back(h.heat_susceptible);
      drought.push_back(h.drought_susceptible);
    }
    const double acc_h = label_accuracy(clusters[0].susceptible, heat);
    const double acc_d = label_accuracy(clusters[1].susceptible, drought);
    report["clustering"]["cluster_recovery_accuracy"] = {{"heat", acc_h}, {"drought", acc_d}};
    report["clustering"]["planted_dual_resistant_fraction"] = truth.dual_resistant_fraction();
    run.log() << "eval: cluster recovery heat " << acc_h << ", drought " << acc_d << "\n";
  }
  run.write_json("report.json", report, "eval");
}

struct CommandOptions {
  bool emit_calendar = false;
};

inline void run_command(const std::string& name, Run& run, const CommandOptions& opt = {}) {
  if (name == "synth") cmd_synth(run);
  else if (name == "dem") cmd_dem(run, opt.emit_calendar);
  else if (name == "train") cmd_train(run);
  else if (name == "sensitivity") cmd_sensitivity(run);
  else if (name == "rank") cmd_rank(run);
  else if (name == "cluster") cmd_cluster(run);
  else if (name == "compare") cmd_compare(run);
  else if (name == "eval") cmd_eval(run);
  else fail(ErrorKind::config, "unknown command '" + name + "'");
  run.save_manifest();
}

}  // namespace agrostress::pipeline
