#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrostress/error.hpp"
#include "agrostress/nn/model.hpp"

namespace agrostress::nn {

// File layout:
//   8 bytes   magic "AGSTRS01"
//   u64 LE    length of the JSON metadata
//   bytes     JSON metadata (spec, DEM parameters, normalization, ids)
//   u64 LE    parameter count
//   f64 LE    parameters
inline constexpr std::array<char, 8> kBundleMagic{'A', 'G', 'S', 'T', 'R', 'S', '0', '1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) fail(ErrorKind::io, "model bundle is truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

inline nlohmann::json stats_json(const FeatureStats& s) {
  return {{"mean", std::vector<double>(s.mean.begin(), s.mean.end())},
          {"stddev", std::vector<double>(s.stddev.begin(), s.stddev.end())}};
}

inline FeatureStats stats_from(const nlohmann::json& j) {
  FeatureStats s;
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto d = j.at("stddev").get<std::vector<double>>();
  if (m.size() != kNumFeatures || d.size() != kNumFeatures) fail(ErrorKind::io, "feature statistics have wrong size");
  std::copy(m.begin(), m.end(), s.mean.begin());
  std::copy(d.begin(), d.end(), s.stddev.begin());
  return s;
}

}  // namespace detail

inline nlohmann::json bundle_metadata(const ModelBundle& b) {
  nlohmann::json j;
  j["format"] = "agrostress-model";
  j["version"] = 1;
  j["model"] = {{"kind", to_string(b.spec.kind)},
                {"combine", dem::to_string(b.spec.combine)},
                {"hidden", b.spec.hidden},
                {"filter_height", b.spec.filter_height},
                {"stride", b.spec.stride},
                {"d_max", b.spec.d_max},
                {"heat_activation", to_string(b.spec.heat_activation)},
                {"drought_activation", to_string(b.spec.drought_activation)},
                {"stress_length", b.spec.stress_length()},
                {"mlp_inputs", b.spec.mlp_inputs()}};
  j["features"] = {{"heat", feature_names(StressModule::heat)}, {"drought", feature_names(StressModule::drought)}};
  j["growth"] = {{"t_base", b.growth.t_base}, {"gdu_mode", to_string(b.growth.mode)}, {"clamp", b.growth.clamp}};
  const auto& h = b.dem.heat;
  const auto& d = b.dem.drought;
  j["dem"] = {{"temp", std::vector<double>(h.temp.begin(), h.temp.end())},
              {"heat", std::vector<double>(h.heat.begin(), h.heat.end())},
              {"cold", std::vector<double>(h.cold.begin(), h.cold.end())},
              {"a0", h.a0},
              {"a1", h.a1},
              {"p", d.p},
              {"q", d.q},
              {"ksat_min", d.ksat_min},
              {"ksat_max", d.ksat_max},
              {"initial_aw_fraction", d.initial_aw_fraction}};
  j["normalization"] = {{"heat", detail::stats_json(b.heat_stats)},
                        {"drought", detail::stats_json(b.drought_stats)},
                        {"input_scale", b.input_scale},
                        {"target_mean", b.target_mean},
                        {"target_scale", b.target_scale}};
  j["ids"] = {{"encoding", "dense index min-max scaled to [0,1]"}, {"hybrids", b.hybrid_ids}, {"environments", b.env_ids}};
  j["seed"] = b.seed;
  j["test_fraction"] = b.test_fraction;
  j["trained"] = b.trained;
  return j;
}

inline void save_bundle(const ModelBundle& b, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  const std::string meta = bundle_metadata(b).dump();
  out.write(kBundleMagic.data(), kBundleMagic.size());
  detail::put_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  detail::put_u64(out, b.params.size());
  for (double p : b.params) detail::put_u64(out, std::bit_cast<std::uint64_t>(p));
  if (!out) fail(ErrorKind::io, "failed to write model bundle");
}

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  save_bundle(b, out);
}

inline ModelBundle load_bundle(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kBundleMagic)
    fail(ErrorKind::io, "not a model bundle (bad magic header)");
  const std::uint64_t meta_len = detail::get_u64(in);
  if (meta_len > (1ULL << 30)) fail(ErrorKind::io, "model bundle metadata is implausibly large");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) fail(ErrorKind::io, "model bundle is truncated");
  ModelBundle b;
  try {
    const auto j = nlohmann::json::parse(meta);
    const auto& m = j.at("model");
    b.spec.kind = parse_model_kind(m.at("kind").get<std::string>());
    b.spec.combine = dem::parse_combine_kind(m.at("combine").get<std::string>());
    b.spec.hidden = m.at("hidden").get<std::vector<int>>();
    b.spec.filter_height = m.at("filter_height").get<int>();
    b.spec.stride = m.at("stride").get<int>();
    b.spec.d_max = m.at("d_max").get<int>();
    b.spec.heat_activation = parse_activation(m.at("heat_activation").get<std::string>());
    b.spec.drought_activation = parse_activation(m.at("drought_activation").get<std::string>());
    const auto& g = j.at("growth");
    b.growth.t_base = g.at("t_base").get<double>();
    b.growth.mode = parse_gdu_mode(g.at("gdu_mode").get<std::string>());
    b.growth.clamp = g.at("clamp").get<bool>();
    const auto& d = j.at("dem");
    const auto arr = [](const nlohmann::json& v, auto& dst) {
      const auto x = v.get<std::vector<double>>();
      if (x.size() != dst.size()) fail(ErrorKind::io, "DEM threshold array has wrong size");
      std::copy(x.begin(), x.end(), dst.begin());
    };
    arr(d.at("temp"), b.dem.heat.temp);
    arr(d.at("heat"), b.dem.heat.heat);
    arr(d.at("cold"), b.dem.heat.cold);
    b.dem.heat.a0 = d.at("a0").get<double>();
    b.dem.heat.a1 = d.at("a1").get<double>();
    b.dem.drought.p = d.at("p").get<double>();
    b.dem.drought.q = d.at("q").get<double>();
    b.dem.drought.ksat_min = d.at("ksat_min").get<double>();
    b.dem.drought.ksat_max = d.at("ksat_max").get<double>();
    b.dem.drought.initial_aw_fraction = d.at("initial_aw_fraction").get<double>();
    b.dem.combine = b.spec.combine;
    const auto& n = j.at("normalization");
    b.heat_stats = detail::stats_from(n.at("heat"));
    b.drought_stats = detail::stats_from(n.at("drought"));
    b.input_scale = n.at("input_scale").get<std::vector<double>>();
    b.target_mean = n.at("target_mean").get<double>();
    b.target_scale = n.at("target_scale").get<double>();
    b.hybrid_ids = j.at("ids").at("hybrids").get<std::vector<std::string>>();
    b.env_ids = j.at("ids").at("environments").get<std::vector<std::string>>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.test_fraction = j.at("test_fraction").get<double>();
    b.trained = j.at("trained").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("malformed model bundle metadata: ") + e.what());
  }
  const std::uint64_t count = detail::get_u64(in);
  if (count != b.spec.param_count())
    fail(ErrorKind::io, "model bundle holds " + std::to_string(count) + " parameters, architecture needs " +
                            std::to_string(b.spec.param_count()));
  if (b.input_scale.size() != static_cast<std::size_t>(3 * b.spec.stress_length()))
    fail(ErrorKind::io, "model bundle input scales do not match the architecture");
  b.params.resize(count);
  for (auto& p : b.params) p = std::bit_cast<double>(detail::get_u64(in));
  return b;
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open model bundle '" + path.string() + "'");
  return load_bundle(in);
}

}  // namespace agrostress::nn
