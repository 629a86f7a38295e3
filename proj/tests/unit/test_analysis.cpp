#include <random>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "agrostress/analysis.hpp"
#include "agrostress/plots.hpp"
#include "test_util.hpp"

using namespace agrostress;
using namespace agrostress::analysis;
using sensitivity::SensitivityMatrix;
using testutil::error_kind;

namespace {

SensitivityMatrix matrix(std::vector<std::vector<double>> rows) {
  SensitivityMatrix m;
  m.kind = "R_heat";
  m.columns = "growth_period";
  for (std::size_t i = 0; i < rows.size(); ++i) m.hybrid_ids.push_back("H" + std::to_string(i));
  m.rows = std::move(rows);
  return m;
}

Ranking random_ranking(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(3));
  std::normal_distribution<double> n01;
  for (auto& r : rows)
    for (auto& v : r) v = n01(rng);
  return rank_hybrids(matrix(rows));
}

// Two blobs `sep` standard deviations apart; the first half sits on the
// larger centre.
SensitivityMatrix two_blobs(std::size_t n, double sep, std::uint64_t seed, std::vector<int>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> rows;
  truth->clear();
  for (std::size_t i = 0; i < n; ++i) {
    const bool hi = i < n / 2;
    std::vector<double> r(18);
    for (auto& v : r) v = (hi ? sep : 0.0) + n01(rng);
    rows.push_back(r);
    truth->push_back(hi ? 1 : 0);
  }
  return matrix(rows);
}

}  // namespace

TEST(Ranking, OrdersByDescendingNorm) {
  const auto r = rank_hybrids(matrix({{3, 0}, {1, 0}, {0, -2}}));
  EXPECT_EQ(r.order, (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(r.scores[2], 2.0);
}

TEST(Ranking, TiesKeepIndexOrder) {
  const auto r = rank_hybrids(matrix({{1, 0}, {0, 2}, {0, 1}, {-1, 0}}));
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 0, 2, 3}));
}

TEST(Ranking, Norms) {
  const std::vector<double> row{3, -4, 1};
  EXPECT_EQ(row_norm(row, Norm::l1), 8.0);
  EXPECT_EQ(row_norm(row, Norm::l2), std::sqrt(26.0));
  EXPECT_EQ(row_norm(row, Norm::linf), 4.0);
}

TEST(Ranking, InvariantUnderPositiveScaling) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> rows(200, std::vector<double>(3));
  for (auto& r : rows)
    for (auto& v : r) v = n01(rng);
  auto scaled = rows;
  for (auto& r : scaled)
    for (auto& v : r) v *= 7.5;
  for (auto norm : {Norm::l1, Norm::l2, Norm::linf})
    EXPECT_EQ(rank_hybrids(matrix(scaled), norm).order, rank_hybrids(matrix(rows), norm).order);
}

TEST(Ranking, EmptyMatrixRejected) {
  EXPECT_EQ(error_kind([] { rank_hybrids(matrix({})); }), ErrorKind::empty_analysis);
}

TEST(Ranking, CsvRoundTrip) {
  std::mt19937_64 rng(4);
  const auto r = random_ranking(30, rng);
  testutil::TempDir dir("rank");
  {
    std::ofstream f(dir / "r.csv");
    write_ranking_csv(r, f);
  }
  const auto back = read_ranking_csv((dir / "r.csv").string());
  EXPECT_EQ(compare_rankings(r, back).spearman, 1.0);
}

TEST(CompareRankings, IdenticalAndReversed) {
  const auto a = rank_hybrids(matrix({{5}, {4}, {3}, {2}, {1}}));
  const auto b = rank_hybrids(matrix({{1}, {2}, {3}, {4}, {5}}));
  EXPECT_EQ(compare_rankings(a, a).spearman, 1.0);
  EXPECT_EQ(compare_rankings(a, b).spearman, -1.0);
}

TEST(CompareRankings, MatchesOracleAndIsNearZeroWhenIndependent) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    const auto a = random_ranking(1000, rng);
    const auto b = random_ranking(1000, rng);
    const auto c = compare_rankings(a, b);
    EXPECT_LT(std::abs(c.spearman), 0.1);
    EXPECT_NEAR(c.spearman, oracle::spearman(positions(a), positions(b)), 1e-12);
  }
}

TEST(CompareRankings, PairsByIdNotByIndex) {
  auto a = rank_hybrids(matrix({{3}, {2}, {1}}));
  auto b = a;
  std::swap(b.hybrid_ids[0], b.hybrid_ids[2]);
  std::swap(b.scores[0], b.scores[2]);
  for (auto& o : b.order) o = 2 - o;
  EXPECT_EQ(compare_rankings(a, b).spearman, 1.0);
}

TEST(CompareRankings, DifferentHybridsArePairingError) {
  auto a = rank_hybrids(matrix({{3}, {2}, {1}}));
  auto b = a;
  b.hybrid_ids[1] = "other";
  std::string msg;
  EXPECT_EQ(error_kind([&] { compare_rankings(a, b); }, &msg), ErrorKind::pairing);
  EXPECT_NE(msg.find("other"), std::string::npos);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  std::vector<int> truth;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = two_blobs(100, 10.0, seed, &truth);
    const auto c = kmeans_cluster(m);
    std::vector<int> labels;
    for (bool s : c.susceptible) labels.push_back(s ? 1 : 0);
    EXPECT_EQ(labels, truth) << seed;
    EXPECT_GT(c.silhouette, 0.8);
  }
}

TEST(KMeans, SilhouetteMatchesDefinition) {
  const auto m = matrix({{0}, {1}, {10}, {12}});
  const auto c = kmeans_cluster(m);
  // Row 0: a = 1, b = (10 + 12) / 2 = 11.
  EXPECT_DOUBLE_EQ(c.silhouette_samples[0], 10.0 / 11.0);
  // Row 3: a = 2, b = (12 + 11) / 2.
  EXPECT_DOUBLE_EQ(c.silhouette_samples[3], (11.5 - 2.0) / 11.5);
}

TEST(KMeans, SingletonClusterScoresZero) {
  const auto c = kmeans_cluster(matrix({{0}, {0.1}, {0.2}, {50}}));
  EXPECT_EQ(c.silhouette_samples[3], 0.0);
  EXPECT_TRUE(c.susceptible[3]);
  EXPECT_FALSE(c.susceptible[0]);
}

TEST(KMeans, DuplicateRowsShareLabels) {
  std::vector<int> truth;
  auto m = two_blobs(40, 3.0, 5, &truth);
  m.rows.push_back(m.rows[3]);
  m.hybrid_ids.push_back("dup");
  const auto c = kmeans_cluster(m);
  EXPECT_EQ(c.assignment.back(), c.assignment[3]);
}

TEST(KMeans, ChosenRestartHasLowestInertia) {
  std::vector<int> truth;
  const auto m = two_blobs(60, 1.0, 2, &truth);
  KMeansConfig cfg;
  cfg.restarts = 12;
  const auto c = kmeans_cluster(m, cfg);
  ASSERT_EQ(c.restart_inertias.size(), 12u);
  for (double v : c.restart_inertias) EXPECT_LE(c.inertia, v);
  double direct = 0.0;
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    direct += squared_distance(m.rows[i], c.centroids[static_cast<std::size_t>(c.assignment[i])]);
  EXPECT_NEAR(c.inertia, direct, 1e-9 * direct);
}

TEST(KMeans, SameSeedSameResult) {
  std::vector<int> truth;
  const auto m = two_blobs(80, 1.5, 7, &truth);
  const auto a = kmeans_cluster(m);
  const auto b = kmeans_cluster(m);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.restart_inertias, b.restart_inertias);
}

TEST(KMeans, DegenerateInputs) {
  EXPECT_EQ(error_kind([] { kmeans_cluster(matrix({{1, 2}})); }), ErrorKind::degenerate);
  EXPECT_EQ(error_kind([] { kmeans_cluster(matrix({{1, 2}, {1, 2}, {1, 2}})); }), ErrorKind::degenerate);
  KMeansConfig cfg;
  cfg.k = 1;
  EXPECT_EQ(error_kind([&] { kmeans_cluster(matrix({{1}, {2}}), cfg); }), ErrorKind::config);
}

TEST(ResistantFraction, AllAndNone) {
  ClusterResult a;
  a.hybrid_ids = {"x", "y", "z", "w"};
  a.susceptible = {false, false, false, false};
  EXPECT_EQ(resistant_fraction({a}), 1.0);
  a.susceptible = {true, true, true, true};
  EXPECT_EQ(resistant_fraction({a}), 0.0);
}

TEST(ResistantFraction, RequiresResistanceInEveryClustering) {
  ClusterResult a, b;
  a.hybrid_ids = b.hybrid_ids = {"x", "y", "z", "w"};
  a.susceptible = {false, false, true, true};
  b.susceptible = {false, true, false, true};
  EXPECT_EQ(resistant_fraction({a, b}), 0.25);
  b.hybrid_ids[0] = "q";
  EXPECT_EQ(error_kind([&] { resistant_fraction({a, b}); }), ErrorKind::pairing);
  EXPECT_EQ(error_kind([] { resistant_fraction({}); }), ErrorKind::empty_analysis);
}

TEST(ClustersCsv, RoundTrip) {
  std::vector<int> truth;
  const auto c = kmeans_cluster(two_blobs(20, 10.0, 1, &truth));
  testutil::TempDir dir("clusters");
  {
    std::ofstream f(dir / "c.csv");
    write_clusters_csv(c, f);
  }
  const auto back = read_clusters_csv((dir / "c.csv").string());
  EXPECT_EQ(back.hybrid_ids, c.hybrid_ids);
  EXPECT_EQ(back.susceptible, c.susceptible);
}

namespace {

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = text.find(what); pos != std::string::npos; pos = text.find(what, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Plots, HeatmapHasOneCellPerEntry) {
  std::vector<std::vector<double>> rows(3, std::vector<double>(18));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 18; ++t) rows[i][t] = static_cast<double>(i) - static_cast<double>(t) / 9.0;
  const auto m = matrix(rows);
  std::ostringstream svg;
  plots::heatmap_svg(m, rank_hybrids(m).order, svg);
  EXPECT_EQ(count(svg.str(), "class=\"cell\""), 54u);
  EXPECT_EQ(svg.str().rfind("</svg>\n"), svg.str().size() - 7);
}

TEST(Plots, ScatterOfIdenticalRankingsLiesOnDiagonal) {
  std::mt19937_64 rng(6);
  const auto r = random_ranking(25, rng);
  std::ostringstream svg;
  plots::scatter_svg(compare_rankings(r, r), svg);
  const std::string text = svg.str();
  EXPECT_EQ(count(text, "class=\"marker\""), 25u);
  // y = (size + 2 margin) - x on the diagonal.
  const std::regex marker("cx=\"([-0-9.e]+)\" cy=\"([-0-9.e]+)\"");
  std::size_t seen = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
    EXPECT_NEAR(std::stod((*it)[1]) + std::stod((*it)[2]), 500.0, 1e-6);
    ++seen;
  }
  EXPECT_EQ(seen, 25u);
}

TEST(Plots, ByteIdenticalAcrossCalls) {
  std::mt19937_64 rng(1);
  const auto r = random_ranking(40, rng);
  std::ostringstream a, b;
  plots::scatter_svg(compare_rankings(r, r), a, "x", "y", "run 1");
  plots::scatter_svg(compare_rankings(r, r), b, "x", "y", "run 1");
  EXPECT_EQ(a.str(), b.str());
}

TEST(Plots, ProvenanceCommentCannotBreakOut) {
  std::ostringstream svg;
  plots::heatmap_svg(matrix({{1}, {2}}), {0, 1}, svg, "a --> b");
  EXPECT_EQ(svg.str().find("a --> b"), std::string::npos);
}
