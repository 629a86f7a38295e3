#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "agrostress/csv.hpp"
#include "agrostress/error.hpp"
#include "agrostress/random.hpp"
#include "agrostress/sensitivity.hpp"

namespace agrostress::analysis {

using sensitivity::SensitivityMatrix;

enum class Norm { l1, l2, linf };

inline const char* to_string(Norm n) {
  switch (n) {
    case Norm::l1: return "L1";
    case Norm::l2: return "L2";
    case Norm::linf: return "Linf";
  }
  return "L2";
}

inline Norm parse_norm(const std::string& s) {
  if (s == "L1" || s == "l1") return Norm::l1;
  if (s == "L2" || s == "l2") return Norm::l2;
  if (s == "Linf" || s == "linf") return Norm::linf;
  fail(ErrorKind::config, "unknown norm '" + s + "' (expected L1, L2 or Linf)");
}

inline double row_norm(const std::vector<double>& row, Norm n) {
  double acc = 0.0;
  for (double v : row) {
    switch (n) {
      case Norm::l1: acc += std::abs(v); break;
      case Norm::l2: acc += v * v; break;
      case Norm::linf: acc = std::max(acc, std::abs(v)); break;
    }
  }
  return n == Norm::l2 ? std::sqrt(acc) : acc;
}

struct Ranking {
  Norm norm = Norm::l2;
  std::vector<std::string> hybrid_ids;  // indexed by hybrid
  std::vector<double> scores;           // indexed by hybrid
  std::vector<std::size_t> order;       // most susceptible first
};

// Hybrids sorted by descending row norm; equal scores keep ascending index.
inline Ranking rank_hybrids(const SensitivityMatrix& m, Norm norm = Norm::l2) {
  if (m.num_rows() == 0) fail(ErrorKind::empty_analysis, "cannot rank an empty matrix");
  Ranking r;
  r.norm = norm;
  r.hybrid_ids = m.hybrid_ids;
  r.scores.resize(m.num_rows());
  for (std::size_t i = 0; i < m.num_rows(); ++i) r.scores[i] = row_norm(m.rows[i], norm);
  r.order.resize(m.num_rows());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  return r;
}

inline void write_ranking_csv(const Ranking& r, std::ostream& out) {
  csv::Writer w(out);
  w.field("rank").field("hybrid_id").field("score");
  w.end_row();
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    w.field(k + 1).field(r.hybrid_ids[r.order[k]]).field(r.scores[r.order[k]]);
    w.end_row();
  }
}

inline Ranking read_ranking_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  const auto c_rank = t.column("rank");
  const auto c_id = t.column("hybrid_id");
  const auto c_score = t.column("score");
  std::vector<std::pair<long, std::size_t>> by_rank;
  Ranking r;
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    r.hybrid_ids.push_back(t.cell(row, c_id));
    r.scores.push_back(t.number(row, c_score));
    by_rank.emplace_back(t.integer(row, c_rank), row);
  }
  std::sort(by_rank.begin(), by_rank.end());
  for (const auto& [rank, row] : by_rank) r.order.push_back(row);
  return r;
}

// 1-based position of each hybrid (indexed like hybrid_ids).
inline std::vector<double> positions(const Ranking& r) {
  std::vector<double> pos(r.order.size());
  for (std::size_t k = 0; k < r.order.size(); ++k) pos[r.order[k]] = static_cast<double>(k + 1);
  return pos;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct RankComparison {
  std::vector<std::string> hybrid_ids;
  std::vector<double> position_a, position_b;
  double spearman = 0.0;
};

// Spearman correlation between the positions of the same hybrids in two
// rankings. Both rankings must cover the same hybrids.
inline RankComparison compare_rankings(const Ranking& a, const Ranking& b) {
  std::unordered_map<std::string, std::size_t> in_b;
  for (std::size_t i = 0; i < b.hybrid_ids.size(); ++i) in_b.emplace(b.hybrid_ids[i], i);
  std::unordered_map<std::string, std::size_t> in_a;
  for (std::size_t i = 0; i < a.hybrid_ids.size(); ++i) in_a.emplace(a.hybrid_ids[i], i);
  std::vector<std::string> missing;
  for (const auto& id : a.hybrid_ids)
    if (!in_b.count(id)) missing.push_back(id + " (only in first)");
  for (const auto& id : b.hybrid_ids)
    if (!in_a.count(id)) missing.push_back(id + " (only in second)");
  if (!missing.empty()) {
    std::string msg = "rankings cover different hybrids:";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + missing[k];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    fail(ErrorKind::pairing, msg);
  }
  if (a.hybrid_ids.size() < 2) fail(ErrorKind::empty_analysis, "need at least two hybrids to compare rankings");
  const auto pa = positions(a);
  const auto pb = positions(b);
  RankComparison c;
  c.hybrid_ids = a.hybrid_ids;
  for (std::size_t i = 0; i < a.hybrid_ids.size(); ++i) {
    c.position_a.push_back(pa[i]);
    c.position_b.push_back(pb[in_b.at(a.hybrid_ids[i])]);
  }
  c.spearman = pearson(c.position_a, c.position_b);
  return c;
}

inline void write_comparison_csv(const RankComparison& c, std::ostream& out) {
  csv::Writer w(out);
  w.field("hybrid_id").field("position_a").field("position_b");
  w.end_row();
  for (std::size_t i = 0; i < c.hybrid_ids.size(); ++i) {
    w.field(c.hybrid_ids[i]).field(c.position_a[i]).field(c.position_b[i]);
    w.end_row();
  }
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

struct KMeansConfig {
  int k = 2;
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 7;
};

struct ClusterResult {
  std::vector<std::string> hybrid_ids;
  std::vector<int> assignment;            // cluster index per hybrid
  std::vector<bool> susceptible;          // per hybrid
  std::vector<std::vector<double>> centroids;
  int susceptible_cluster = 0;
  double silhouette = 0.0;
  std::vector<double> silhouette_samples;
  double inertia = 0.0;
  std::vector<double> restart_inertias;
  int iterations = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct Lloyd {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  int iterations = 0;
};

inline std::size_t nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& c, double* dist) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double d = squared_distance(x, c[j]);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  if (dist) *dist = bd;
  return best;
}

inline Lloyd run_once(const std::vector<std::vector<double>>& rows, int k, int max_iter, Rng& rng) {
  const std::size_t n = rows.size();
  Lloyd out;
  // k-means++ seeding: first centre uniform, then proportional to squared distance.
  out.centroids.push_back(rows[uniform_index(rng, n)]);
  std::vector<double> d2(n);
  while (out.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest(rows[i], out.centroids, &d2[i]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = uniform_index(rng, n);
    }
    out.centroids.push_back(rows[pick]);
  }
  out.assignment.assign(n, -1);
  const std::size_t dim = rows.front().size();
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest(rows[i], out.centroids, nullptr));
      if (c != out.assignment[i]) {
        out.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sum(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(out.assignment[i]);
      ++count[c];
      for (std::size_t d = 0; d < dim; ++d) sum[c][d] += rows[i][d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (count[c] == 0) continue;  // an empty cluster keeps its previous centre
      for (std::size_t d = 0; d < dim; ++d) out.centroids[c][d] = sum[c][d] / static_cast<double>(count[c]);
    }
  }
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += squared_distance(rows[i], out.centroids[static_cast<std::size_t>(out.assignment[i])]);
  return out;
}

}  // namespace detail

// Mean silhouette with Euclidean distance. Members of singleton clusters
// score 0.
inline std::vector<double> silhouette_samples(const std::vector<std::vector<double>>& rows,
                                              const std::vector<int>& assignment, int k) {
  const std::size_t n = rows.size();
  std::vector<double> s(n, 0.0);
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++size[static_cast<std::size_t>(a)];
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assignment[i]);
    if (size[own] <= 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[static_cast<std::size_t>(assignment[j])] += std::sqrt(squared_distance(rows[i], rows[j]));
    const double a = sums[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != own && size[c] > 0) b = std::min(b, sums[c] / static_cast<double>(size[c]));
    if (!std::isfinite(b)) continue;
    const double den = std::max(a, b);
    s[i] = den > 0.0 ? (b - a) / den : 0.0;
  }
  return s;
}

// K-means on matrix rows with k-means++ seeding; the restart with the lowest
// inertia wins (earliest on ties). With two clusters, the one whose members
// have the larger mean absolute entry is labelled susceptible.
inline ClusterResult kmeans_cluster(const SensitivityMatrix& m, const KMeansConfig& cfg = {}) {
  if (cfg.k < 2) fail(ErrorKind::config, "k-means needs k >= 2");
  if (cfg.restarts < 1 || cfg.max_iterations < 1) fail(ErrorKind::config, "k-means restarts and iterations must be >= 1");
  const auto& rows = m.rows;
  if (rows.size() < static_cast<std::size_t>(cfg.k))
    fail(ErrorKind::degenerate, "k-means needs at least as many rows as clusters");
  bool distinct = false;
  for (std::size_t i = 1; i < rows.size() && !distinct; ++i) distinct = rows[i] != rows[0];
  if (!distinct) fail(ErrorKind::degenerate, "all matrix rows are identical; clustering is degenerate");

  Rng rng(cfg.seed);
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    auto run = detail::run_once(rows, cfg.k, cfg.max_iterations, rng);
    best.restart_inertias.push_back(run.inertia);
    if (run.inertia < best.inertia) {
      best.inertia = run.inertia;
      best.assignment = std::move(run.assignment);
      best.centroids = std::move(run.centroids);
      best.iterations = run.iterations;
    }
  }
  best.hybrid_ids = m.hybrid_ids;
  best.seed = cfg.seed;
  best.silhouette_samples = silhouette_samples(rows, best.assignment, cfg.k);
  best.silhouette = std::accumulate(best.silhouette_samples.begin(), best.silhouette_samples.end(), 0.0) /
                    static_cast<double>(rows.size());

  std::vector<double> abs_sum(static_cast<std::size_t>(cfg.k), 0.0), cells(static_cast<std::size_t>(cfg.k), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = static_cast<std::size_t>(best.assignment[i]);
    for (double v : rows[i]) abs_sum[c] += std::abs(v);
    cells[c] += static_cast<double>(rows[i].size());
  }
  double top = -1.0;
  for (std::size_t c = 0; c < abs_sum.size(); ++c) {
    const double mean = cells[c] > 0.0 ? abs_sum[c] / cells[c] : 0.0;
    if (mean > top) {
      top = mean;
      best.susceptible_cluster = static_cast<int>(c);
    }
  }
  best.susceptible.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) best.susceptible[i] = best.assignment[i] == best.susceptible_cluster;
  return best;
}

inline void write_clusters_csv(const ClusterResult& c, std::ostream& out) {
  csv::Writer w(out);
  w.field("hybrid_id").field("label").field("silhouette_sample");
  w.end_row();
  for (std::size_t i = 0; i < c.hybrid_ids.size(); ++i) {
    w.field(c.hybrid_ids[i]).field(c.susceptible[i] ? "susceptible" : "resistant").field(c.silhouette_samples[i]);
    w.end_row();
  }
}

inline ClusterResult read_clusters_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  const auto c_id = t.column("hybrid_id");
  const auto c_label = t.column("label");
  const auto c_sil = t.column("silhouette_sample");
  ClusterResult r;
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const auto& label = t.cell(row, c_label);
    if (label != "susceptible" && label != "resistant")
      fail(ErrorKind::validation, t.where(row) + ": label must be susceptible or resistant");
    r.hybrid_ids.push_back(t.cell(row, c_id));
    r.susceptible.push_back(label == "susceptible");
    r.assignment.push_back(label == "susceptible" ? 1 : 0);
    r.silhouette_samples.push_back(t.number(row, c_sil));
  }
  r.susceptible_cluster = 1;
  return r;
}

// Fraction of hybrids labelled resistant in every result.
inline double resistant_fraction(const std::vector<ClusterResult>& results) {
  if (results.empty()) fail(ErrorKind::empty_analysis, "resistant_fraction needs at least one clustering");
  const auto& ids = results.front().hybrid_ids;
  if (ids.empty()) fail(ErrorKind::empty_analysis, "clustering covers no hybrids");
  for (const auto& r : results)
    if (r.hybrid_ids != ids) fail(ErrorKind::pairing, "clusterings cover different hybrids");
  std::size_t count = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    bool all = true;
    for (const auto& r : results) all = all && !r.susceptible[i];
    if (all) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(ids.size());
}

}  // namespace agrostress::analysis
