#include <optional>
#include <sstream>

#include <gtest/gtest.h>

#include "agrostress/data.hpp"
#include "agrostress/synth.hpp"
#include "test_util.hpp"

using namespace agrostress;
using testutil::error_kind;
using testutil::fixture;
using testutil::TempDir;

namespace {

DatasetPaths copy_tiny(const TempDir& dir) {
  for (const char* f : {"weather.csv", "environments.csv", "performance.csv"})
    std::filesystem::copy_file(fixture(std::string("tiny/") + f), dir / f);
  return DatasetPaths::in(dir.path());
}

SynthConfig small_synth() {
  SynthConfig c;
  c.n_hybrids = 12;
  c.n_envs = 6;
  c.instances_per_hybrid = 4;
  return c;
}

}  // namespace

TEST(LoadDataset, TinyFixture) {
  const auto ds = load_dataset(DatasetPaths::in(fixture("tiny")));
  ASSERT_EQ(ds.num_environments(), 2u);
  ASSERT_EQ(ds.num_instances(), 3u);
  EXPECT_EQ(ds.num_hybrids(), 2u);
  EXPECT_EQ(ds.hybrid_index("H1"), 0u);
  EXPECT_EQ(ds.hybrid_index("H2"), 1u);
  EXPECT_EQ(ds.env_of(1), ds.env_index("B"));

  const auto& a = ds.environments()[ds.env_index("A")];
  ASSERT_EQ(a.weather.size(), 20u);
  EXPECT_EQ(a.weather.front().day_index, 0);
  EXPECT_DOUBLE_EQ(a.weather.front().tmax, 24.0);
  EXPECT_DOUBLE_EQ(a.weather.front().swe, 0.0);  // empty cell
  EXPECT_DOUBLE_EQ(a.weather[2].prec, 12.5);
  EXPECT_EQ(ds.instances()[1].irr, 3);
  EXPECT_DOUBLE_EQ(ds.instances()[1].yield_obs, 180.25);
}

TEST(LoadDataset, WeatherRowsInAnyOrder) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  auto text = testutil::slurp(paths.weather);
  const auto header_end = text.find('\n') + 1;
  std::istringstream body(text.substr(header_end));
  std::vector<std::string> lines;
  for (std::string l; std::getline(body, l);) lines.push_back(l);
  std::reverse(lines.begin(), lines.end());
  std::string out = text.substr(0, header_end);
  for (const auto& l : lines) out += l + "\n";
  testutil::spit(paths.weather, out);

  const auto shuffled = load_dataset(paths);
  const auto ref = load_dataset(DatasetPaths::in(fixture("tiny")));
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t d = 0; d < 20; ++d)
      EXPECT_EQ(shuffled.environments()[e].weather[d].tmean, ref.environments()[e].weather[d].tmean);
}

TEST(LoadDataset, TminAboveTmaxCitesRow) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  testutil::replace_once(paths.weather, "A,101,25.3,13.3,19.3", "A,101,20,25,22");
  std::string msg;
  EXPECT_EQ(error_kind([&] { load_dataset(paths); }, &msg), ErrorKind::validation);
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("tmin > tmax"), std::string::npos) << msg;
}

TEST(LoadDataset, UnknownEnvironmentIsReferential) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  testutil::replace_once(paths.performance, "H2,A,", "H2,X99,");
  std::string msg;
  EXPECT_EQ(error_kind([&] { load_dataset(paths); }, &msg), ErrorKind::referential);
  EXPECT_NE(msg.find("X99"), std::string::npos);
}

TEST(LoadDataset, MissingColumnIsSchemaError) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  testutil::replace_once(paths.performance, "hybrid_id,env_id,irr,yield", "hybrid_id,env_id,irrigation,yield");
  std::string msg;
  EXPECT_EQ(error_kind([&] { load_dataset(paths); }, &msg), ErrorKind::schema);
  EXPECT_NE(msg.find("irr"), std::string::npos) << msg;
}

TEST(LoadDataset, IrrigationOutOfRange) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  testutil::replace_once(paths.performance, "H1,B,3,", "H1,B,4,");
  EXPECT_EQ(error_kind([&] { load_dataset(paths); }), ErrorKind::validation);
}

TEST(LoadDataset, MissingWeatherDay) {
  TempDir dir("data");
  auto paths = copy_tiny(dir);
  auto text = testutil::slurp(paths.weather);
  const auto pos = text.find("B,155,");
  text.erase(pos, text.find('\n', pos) - pos + 1);
  testutil::spit(paths.weather, text);
  EXPECT_EQ(error_kind([&] { load_dataset(paths); }), ErrorKind::validation);
}

TEST(WriteDataset, RoundTripIsExact) {
  TempDir dir("data");
  const auto ref = load_dataset(DatasetPaths::in(fixture("tiny")));
  const auto paths = DatasetPaths::in(dir / "out");
  write_dataset(ref, paths);
  const auto back = load_dataset(paths);
  ASSERT_EQ(back.num_instances(), ref.num_instances());
  for (std::size_t e = 0; e < ref.num_environments(); ++e) {
    const auto& a = ref.environments()[e];
    const auto& b = back.environments()[e];
    EXPECT_EQ(a.env_id, b.env_id);
    EXPECT_EQ(a.planting_day, b.planting_day);
    EXPECT_EQ(a.ksat, b.ksat);
    for (std::size_t d = 0; d < a.weather.size(); ++d) {
      EXPECT_EQ(a.weather[d].tmax, b.weather[d].tmax);
      EXPECT_EQ(a.weather[d].vp, b.weather[d].vp);
      EXPECT_EQ(a.weather[d].dayl, b.weather[d].dayl);
    }
  }
  for (std::size_t i = 0; i < ref.num_instances(); ++i) {
    EXPECT_EQ(ref.instances()[i].hybrid_id, back.instances()[i].hybrid_id);
    EXPECT_EQ(ref.instances()[i].yield_obs, back.instances()[i].yield_obs);
  }
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
  TempDir dir("data");
  const auto cfg = small_synth();
  write_dataset(generate_synthetic(cfg, 7).dataset, DatasetPaths::in(dir / "a"));
  write_dataset(generate_synthetic(cfg, 7).dataset, DatasetPaths::in(dir / "b"));
  for (const char* f : {"weather.csv", "environments.csv", "performance.csv"})
    EXPECT_EQ(testutil::slurp(dir / "a" / f), testutil::slurp(dir / "b" / f)) << f;
}

TEST(Synthetic, CsvRoundTripReproducesValues) {
  TempDir dir("data");
  const auto ds = generate_synthetic(small_synth(), 3).dataset;
  write_dataset(ds, DatasetPaths::in(dir.path()));
  const auto back = load_dataset(DatasetPaths::in(dir.path()));
  for (std::size_t e = 0; e < ds.num_environments(); ++e)
    for (std::size_t d = 0; d < ds.environments()[e].weather.size(); ++d)
      EXPECT_EQ(ds.environments()[e].weather[d].tmean, back.environments()[e].weather[d].tmean);
}

TEST(Synthetic, ExactlyHalfLabelledPerStress) {
  SynthConfig c;
  c.n_envs = 10;
  c.instances_per_hybrid = 2;
  for (auto layout : {LabelLayout::blocked, LabelLayout::random}) {
    c.label_layout = layout;
    const auto r = generate_synthetic(c, 7);
    int heat = 0, drought = 0;
    for (const auto& h : r.truth.hybrids) {
      heat += h.heat_susceptible;
      drought += h.drought_susceptible;
    }
    EXPECT_EQ(heat, 100);
    EXPECT_EQ(drought, 100);
  }
}

TEST(Synthetic, FractionZeroHasNoPenalty) {
  auto c = small_synth();
  c.susceptible_fraction = 0.0;
  const auto r = generate_synthetic(c, 11);
  for (std::size_t i = 0; i < r.truth.heat_penalty.size(); ++i) {
    EXPECT_EQ(r.truth.heat_penalty[i], 0.0);
    EXPECT_EQ(r.truth.drought_penalty[i], 0.0);
  }
}

TEST(Synthetic, DualResistantHybridsCarryNoPenalty) {
  const auto r = generate_synthetic(small_synth(), 5);
  for (std::size_t i = 0; i < r.dataset.num_instances(); ++i) {
    const auto& h = r.truth.hybrids[r.dataset.hybrid_of(i)];
    if (!h.heat_susceptible) {
      EXPECT_EQ(r.truth.heat_penalty[i], 0.0);
    }
    if (!h.drought_susceptible) {
      EXPECT_EQ(r.truth.drought_penalty[i], 0.0);
    }
  }
}

TEST(Synthetic, WeatherValidOverManySeeds) {
  const auto c = small_synth();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = generate_synthetic(c, seed);  // the Dataset constructor validates every day
    for (const auto& e : r.dataset.environments())
      for (const auto& w : e.weather) ASSERT_EQ(check_weather(w), "") << "seed " << seed;
  }
}

TEST(Synthetic, DegenerateConfigsRejected) {
  auto c = small_synth();
  c.n_hybrids = 0;
  EXPECT_EQ(error_kind([&] { generate_synthetic(c, 1); }), ErrorKind::config);
  c = small_synth();
  c.season_length = 10;
  EXPECT_EQ(error_kind([&] { generate_synthetic(c, 1); }), ErrorKind::config);
  c = small_synth();
  c.irrigation_weights = {0, 0, 0, 0};
  EXPECT_EQ(error_kind([&] { generate_synthetic(c, 1); }), ErrorKind::config);
}

TEST(Synthetic, GroundTruthCsvRoundTrip) {
  const auto r = generate_synthetic(small_synth(), 9);
  TempDir dir("data");
  {
    std::ofstream f(dir / "truth.csv");
    write_ground_truth_csv(r.truth, f);
  }
  const auto back = read_ground_truth_csv((dir / "truth.csv").string());
  ASSERT_EQ(back.hybrids.size(), r.truth.hybrids.size());
  for (std::size_t i = 0; i < back.hybrids.size(); ++i) {
    EXPECT_EQ(back.hybrid_ids[i], r.truth.hybrid_ids[i]);
    EXPECT_EQ(back.hybrids[i].heat_susceptible, r.truth.hybrids[i].heat_susceptible);
    EXPECT_EQ(back.hybrids[i].drought_coefficient, r.truth.hybrids[i].drought_coefficient);
  }
}
